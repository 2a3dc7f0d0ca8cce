#pragma once

// Screening surface: model registry with atomic swap, single-image screening,
// JSON-lines audit log and the HTTP front end.

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>

#include "covilearn/architecture.hpp"
#include "covilearn/dataset.hpp"
#include "covilearn/parameters.hpp"
#include "covilearn/preprocess.hpp"

namespace covilearn {

std::string sha256_hex(std::span<const std::uint8_t> bytes);

// UTC, millisecond resolution: 2026-01-31T12:00:00.123Z
std::string utc_timestamp();

struct ModelRegistryEntry {
    std::string model_id;  // "<variant>@<first 12 hex digits of digest>"
    std::string variant;
    std::string tag;
    std::filesystem::path weights_path;
    std::string digest;  // sha256 of the weights file
    std::string loaded_at;

    std::string to_json() const;
};

// Immutable once built; requests share it read-only.
struct ModelSnapshot {
    ModelRegistryEntry entry;
    ArchitectureGraph graph;
    ParameterStore params;
    PreprocessOptions preprocess;
};

std::shared_ptr<const ModelSnapshot> load_model(const ModelVariant& variant, const std::filesystem::path& weights_path,
                                                const std::optional<ChannelMean>& channel_mean = std::nullopt);

class ModelRegistry {
public:
    explicit ModelRegistry(std::shared_ptr<const ModelSnapshot> initial);

    std::shared_ptr<const ModelSnapshot> active() const;
    // Loads and swaps in a new snapshot. On failure the active model stays.
    std::shared_ptr<const ModelSnapshot> reload(const std::optional<std::filesystem::path>& weights_path = {});

private:
    mutable std::mutex mu_;
    std::shared_ptr<const ModelSnapshot> active_;
};

struct ScreeningResult {
    std::string request_id;
    Label label = Label::Normal;
    std::array<double, 2> probabilities{};  // covid, normal
    std::string model_id;
    double processing_ms = 0.0;
    std::string timestamp;

    std::string to_json() const;  // one line
};

// Sniff, decode, preprocess to the model input and classify one image.
ScreeningResult screen_image(const ModelSnapshot& model, std::span<const std::uint8_t> bytes,
                             std::string request_id = {});

// Append-only JSON-lines store with one writer thread fed by a queue. Write
// failures never propagate to callers; they mark the log degraded until the
// next successful write.
class AuditLog {
public:
    explicit AuditLog(std::filesystem::path path, std::string webhook_url = {});
    ~AuditLog();
    AuditLog(const AuditLog&) = delete;
    AuditLog& operator=(const AuditLog&) = delete;

    // Stamps `result.timestamp` in queue order and enqueues the record.
    ScreeningResult record(ScreeningResult result);
    // Blocks until every queued record has been handled.
    void flush();

    bool degraded() const noexcept { return degraded_.load(); }
    std::string last_error() const;
    const std::filesystem::path& path() const noexcept { return path_; }

private:
    void run();
    bool write_line(const std::string& line);
    void post_webhook(const std::string& line);

    std::filesystem::path path_;
    std::string webhook_url_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::condition_variable drained_;
    std::deque<std::string> queue_;
    bool busy_ = false;
    bool stopping_ = false;
    std::string last_error_;
    std::chrono::system_clock::time_point last_stamp_{};
    std::atomic<bool> degraded_{false};
    std::thread worker_;
};

struct ServiceConfig {
    std::string host = "127.0.0.1";
    int port = 8080;  // 0 picks a free port
    std::filesystem::path weights_path;
    std::string variant = "densenet121-gapdense";
    std::filesystem::path log_path = "screenings.jsonl";
    std::string webhook_url;
    std::size_t max_body_bytes = 32u << 20;
    std::optional<ChannelMean> channel_mean;

    // "host:port", ":port" or "port"
    void set_address(std::string_view address);
    // CVL_ADDR, CVL_WEIGHTS, CVL_LOG
    void apply_environment();
};

class ScreeningService {
public:
    // Loads the model; throws on unreadable or mismatched weights.
    explicit ScreeningService(ServiceConfig config);
    ~ScreeningService();
    ScreeningService(const ScreeningService&) = delete;
    ScreeningService& operator=(const ScreeningService&) = delete;

    // Binds and serves on a background thread; returns the bound port.
    int start();
    // Binds and serves on the calling thread until stop().
    void run();
    void stop();

    ModelRegistry& registry() noexcept { return registry_; }
    AuditLog& audit() noexcept { return audit_; }
    const ServiceConfig& config() const noexcept { return config_; }

private:
    struct Http;

    int bind();
    std::string next_request_id();

    ServiceConfig config_;
    ModelRegistry registry_;
    AuditLog audit_;
    std::unique_ptr<Http> http_;
    std::thread listener_;
    std::atomic<std::uint64_t> request_counter_{0};
};

}  // namespace covilearn
