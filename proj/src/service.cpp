#include "covilearn/service.hpp"

#include <openssl/evp.h>

#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iostream>

#include "covilearn/errors.hpp"
#include "covilearn/image.hpp"
#include "covilearn/training.hpp"
#include "covilearn/weights_io.hpp"
#define CPPHTTPLIB_LISTEN_BACKLOG 512
#include "httplib.h"
#include "json.hpp"

namespace covilearn {

using nlohmann::json;

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 digest failed");
    static const char* hex = "0123456789abcdef";
    std::string out;
    out.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) {
        out.push_back(hex[digest[i] >> 4]);
        out.push_back(hex[digest[i] & 0xF]);
    }
    return out;
}

namespace {

std::string format_time(std::chrono::system_clock::time_point tp) {
    const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(tp.time_since_epoch()).count();
    const std::time_t secs = static_cast<std::time_t>(ms / 1000);
    std::tm tm{};
    gmtime_r(&secs, &tm);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1,
                  tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms % 1000));
    return buf;
}

json error_body(std::string_view code, std::string_view reason) {
    return json{{"error", code}, {"reason", reason}};
}

}  // namespace

std::string utc_timestamp() { return format_time(std::chrono::system_clock::now()); }

std::string ModelRegistryEntry::to_json() const {
    return json{{"model_id", model_id},
                {"variant", variant},
                {"tag", tag},
                {"weights_path", weights_path.string()},
                {"digest", digest},
                {"loaded_at", loaded_at},
                {"active", true}}
        .dump();
}

std::shared_ptr<const ModelSnapshot> load_model(const ModelVariant& variant, const std::filesystem::path& weights_path,
                                                const std::optional<ChannelMean>& channel_mean) {
    ArchitectureGraph graph = assemble_model(variant);
    const Bytes bytes = read_file_bytes(weights_path);
    ParameterStore params;
    try {
        params = deserialize_weights(bytes, graph);
    } catch (const FormatError& e) {
        throw FormatError(weights_path.string() + ": " + e.what());
    }
    ModelRegistryEntry entry;
    entry.variant = variant.name();
    entry.tag = variant.tag();
    entry.weights_path = weights_path;
    entry.digest = sha256_hex(bytes);
    entry.model_id = entry.variant + "@" + entry.digest.substr(0, 12);
    entry.loaded_at = utc_timestamp();

    PreprocessOptions pre;
    pre.target_size = graph.input_shape().back();
    if (channel_mean) {
        pre.subtract_mean = true;
        pre.channel_mean = *channel_mean;
    }
    return std::make_shared<const ModelSnapshot>(
        ModelSnapshot{std::move(entry), std::move(graph), std::move(params), pre});
}

ModelRegistry::ModelRegistry(std::shared_ptr<const ModelSnapshot> initial) : active_(std::move(initial)) {
    if (!active_) throw ArgumentError("model registry needs an initial model");
}

std::shared_ptr<const ModelSnapshot> ModelRegistry::active() const {
    std::lock_guard lock(mu_);
    return active_;
}

std::shared_ptr<const ModelSnapshot> ModelRegistry::reload(const std::optional<std::filesystem::path>& weights_path) {
    const auto current = active();
    std::optional<ChannelMean> mean;
    if (current->preprocess.subtract_mean) mean = current->preprocess.channel_mean;
    auto fresh = load_model(ModelVariant::parse(current->entry.variant),
                            weights_path.value_or(current->entry.weights_path), mean);
    std::lock_guard lock(mu_);
    active_ = fresh;
    return fresh;
}

std::string ScreeningResult::to_json() const {
    return json{{"request_id", request_id},
                {"label", to_string(label)},
                {"probabilities", {probabilities[0], probabilities[1]}},
                {"classes", {"covid", "normal"}},
                {"confidence", probabilities[class_index(label)]},
                {"model_id", model_id},
                {"processing_ms", processing_ms},
                {"timestamp", timestamp}}
        .dump();
}

ScreeningResult screen_image(const ModelSnapshot& model, std::span<const std::uint8_t> bytes, std::string request_id) {
    const auto start = std::chrono::steady_clock::now();
    const RawImage raw = decode_image(bytes);
    const Tensor pixels = preprocess(raw, model.preprocess);
    Shape batch{1};
    batch.insert(batch.end(), pixels.shape().begin(), pixels.shape().end());
    const auto preds = predict(model.graph, model.params, pixels.reshaped(batch));

    ScreeningResult r;
    r.request_id = std::move(request_id);
    r.label = preds[0].label;
    r.probabilities = {preds[0].probabilities[0], preds[0].probabilities[1]};
    r.model_id = model.entry.model_id;
    r.processing_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    return r;
}

// ---------------------------------------------------------------------------
// Audit log

AuditLog::AuditLog(std::filesystem::path path, std::string webhook_url)
    : path_(std::move(path)), webhook_url_(std::move(webhook_url)), worker_([this] { run(); }) {}

AuditLog::~AuditLog() {
    {
        std::lock_guard lock(mu_);
        stopping_ = true;
    }
    cv_.notify_all();
    worker_.join();
}

ScreeningResult AuditLog::record(ScreeningResult result) {
    {
        std::lock_guard lock(mu_);
        last_stamp_ = std::max(last_stamp_, std::chrono::system_clock::now());
        result.timestamp = format_time(last_stamp_);
        queue_.push_back(result.to_json());
    }
    cv_.notify_one();
    return result;
}

void AuditLog::flush() {
    std::unique_lock lock(mu_);
    drained_.wait(lock, [this] { return queue_.empty() && !busy_; });
}

std::string AuditLog::last_error() const {
    std::lock_guard lock(mu_);
    return last_error_;
}

void AuditLog::run() {
    std::unique_lock lock(mu_);
    for (;;) {
        cv_.wait(lock, [this] { return stopping_ || !queue_.empty(); });
        if (queue_.empty()) {
            if (stopping_) return;
            continue;
        }
        std::string line = std::move(queue_.front());
        queue_.pop_front();
        busy_ = true;
        lock.unlock();
        const bool ok = write_line(line);
        if (ok && !webhook_url_.empty()) post_webhook(line);
        lock.lock();
        busy_ = false;
        if (queue_.empty()) drained_.notify_all();
    }
}

bool AuditLog::write_line(const std::string& line) {
    std::ofstream out(path_, std::ios::binary | std::ios::app);
    if (out) out << line << '\n';
    if (out) out.flush();
    if (!out) {
        const std::string message = "cannot append to audit log '" + path_.string() + "'";
        std::cerr << message << '\n';
        std::lock_guard lock(mu_);
        last_error_ = message;
        degraded_ = true;
        return false;
    }
    degraded_ = false;
    return true;
}

void AuditLog::post_webhook(const std::string& line) {
    constexpr int kRetries = 3;
    const auto scheme_end = webhook_url_.find("://");
    const auto path_start = webhook_url_.find('/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    const std::string origin = webhook_url_.substr(0, path_start);
    const std::string target = path_start == std::string::npos ? "/" : webhook_url_.substr(path_start);
    httplib::Client client(origin);
    client.set_connection_timeout(2);
    client.set_read_timeout(2);
    for (int attempt = 0; attempt <= kRetries; ++attempt) {
        auto res = client.Post(target, line, "application/json");
        if (res && res->status >= 200 && res->status < 300) return;
    }
    std::cerr << "webhook delivery to '" << webhook_url_ << "' failed after " << kRetries << " retries\n";
}

// ---------------------------------------------------------------------------
// HTTP service

void ServiceConfig::set_address(std::string_view address) {
    const auto colon = address.rfind(':');
    std::string_view port_text = address;
    if (colon != std::string_view::npos) {
        if (colon > 0) host = std::string(address.substr(0, colon));
        port_text = address.substr(colon + 1);
    }
    try {
        std::size_t used = 0;
        const int p = std::stoi(std::string(port_text), &used);
        if (used != port_text.size() || p < 0 || p > 65535) throw std::invalid_argument("range");
        port = p;
    } catch (const std::exception&) {
        throw ArgumentError("invalid address '" + std::string(address) + "'");
    }
}

void ServiceConfig::apply_environment() {
    if (const char* v = std::getenv("CVL_ADDR"); v && *v) set_address(v);
    if (const char* v = std::getenv("CVL_WEIGHTS"); v && *v) weights_path = v;
    if (const char* v = std::getenv("CVL_LOG"); v && *v) log_path = v;
}

struct ScreeningService::Http {
    httplib::Server server;
};

namespace {

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

}  // namespace

ScreeningService::ScreeningService(ServiceConfig config)
    : config_(std::move(config)),
      registry_(load_model(ModelVariant::parse(config_.variant), config_.weights_path, config_.channel_mean)),
      audit_(config_.log_path, config_.webhook_url),
      http_(std::make_unique<Http>()) {
    auto& srv = http_->server;
    srv.set_payload_max_length(config_.max_body_bytes);

    srv.Get("/health", [this](const httplib::Request&, httplib::Response& res) {
        reply(res, 200,
              json{{"status", audit_.degraded() ? "degraded" : "ok"}, {"model_id", registry_.active()->entry.model_id}});
    });

    srv.Get("/model", [this](const httplib::Request&, httplib::Response& res) {
        res.set_content(registry_.active()->entry.to_json(), "application/json");
    });

    srv.Post("/model/reload", [this](const httplib::Request& req, httplib::Response& res) {
        std::optional<std::filesystem::path> path;
        if (!req.body.empty()) {
            const auto body = json::parse(req.body, nullptr, false);
            if (body.is_discarded() || !body.is_object()) {
                reply(res, 400, error_body("malformed_request", "reload body must be a JSON object"));
                return;
            }
            if (body.contains("weights")) {
                if (!body["weights"].is_string()) {
                    reply(res, 400, error_body("malformed_request", "'weights' must be a string path"));
                    return;
                }
                path = body["weights"].get<std::string>();
            }
        }
        try {
            res.set_content(registry_.reload(path)->entry.to_json(), "application/json");
        } catch (const Error& e) {
            reply(res, 422, error_body("reload_failed", e.what()));
        }
    });

    srv.Post("/screen", [this](const httplib::Request& req, httplib::Response& res) {
        std::string_view body = req.body;
        if (req.is_multipart_form_data()) {
            if (req.files.empty()) {
                reply(res, 400, error_body("empty_body", "multipart request carries no file part"));
                return;
            }
            auto it = req.files.find("image");
            if (it == req.files.end()) it = req.files.begin();
            body = it->second.content;
        }
        if (body.empty()) {
            reply(res, 400, error_body("empty_body", "request body is empty"));
            return;
        }
        const auto model = registry_.active();
        const std::span<const std::uint8_t> bytes(reinterpret_cast<const std::uint8_t*>(body.data()), body.size());
        try {
            if (sniff_image_format(bytes) == ImageFormat::Unknown) {
                reply(res, 415, error_body("unsupported_media_type", "unrecognized image format"));
                return;
            }
            ScreeningResult result = screen_image(*model, bytes, next_request_id());
            result = audit_.record(std::move(result));
            res.set_content(result.to_json(), "application/json");
        } catch (const UnsupportedFeatureError& e) {
            reply(res, 415, error_body("unsupported_feature", e.what()));
        } catch (const FormatError& e) {
            reply(res, 400, error_body("malformed_image", e.what()));
        } catch (const ArgumentError& e) {
            reply(res, 400, error_body("invalid_image", e.what()));
        } catch (const DimensionError& e) {
            reply(res, 400, error_body("invalid_image", e.what()));
        }
    });

    srv.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
        std::string reason = "internal error";
        try {
            std::rethrow_exception(ep);
        } catch (const std::exception& e) {
            reason = e.what();
        } catch (...) {
        }
        reply(res, 500, error_body("internal_error", reason));
    });

    srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
        if (!res.body.empty()) return;
        if (res.status == 413)
            reply(res, 413, error_body("payload_too_large", "request body exceeds the configured limit"));
        else if (res.status == 404)
            reply(res, 404, error_body("not_found", "no such endpoint"));
        else
            reply(res, res.status, error_body("http_error", httplib::status_message(res.status)));
    });
}

ScreeningService::~ScreeningService() { stop(); }

int ScreeningService::bind() {
    auto& srv = http_->server;
    const int port = config_.port == 0 ? srv.bind_to_any_port(config_.host)
                                       : (srv.bind_to_port(config_.host, config_.port) ? config_.port : -1);
    if (port < 0)
        throw IoError("cannot bind " + config_.host + ":" + std::to_string(config_.port));
    return port;
}

int ScreeningService::start() {
    const int port = bind();
    listener_ = std::thread([this] { http_->server.listen_after_bind(); });
    http_->server.wait_until_ready();
    return port;
}

void ScreeningService::run() {
    bind();
    http_->server.listen_after_bind();
}

void ScreeningService::stop() {
    if (http_) http_->server.stop();
    if (listener_.joinable()) listener_.join();
    audit_.flush();
}

std::string ScreeningService::next_request_id() {
    char buf[32];
    std::snprintf(buf, sizeof buf, "req-%08llu", static_cast<unsigned long long>(++request_counter_));
    return buf;
}

}  // namespace covilearn
