#pragma once

#include <atomic>
#include <filesystem>
#include <random>
#include <string>

#include "covilearn/architecture.hpp"
#include "covilearn/image.hpp"
#include "covilearn/parameters.hpp"
#include "covilearn/weights_io.hpp"

namespace fixture {

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("covilearn-" + tag + "-" + std::to_string(std::random_device{}()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::filesystem::path write_initial_weights(const std::filesystem::path& path, const std::string& variant,
                                                   std::uint64_t seed) {
    const auto g = covilearn::assemble_model(covilearn::ModelVariant::parse(variant));
    covilearn::write_weights_file(path, covilearn::initialize_parameters(g, seed), g);
    return path;
}

inline std::string gray_png(std::size_t size, double value) {
    covilearn::Tensor px({1, size, size}, value);
    const auto bytes = covilearn::encode_png({px, 255.0});
    return {bytes.begin(), bytes.end()};
}

inline std::string noise_png(std::size_t size, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    covilearn::Tensor px({3, size, size});
    for (double& v : px.data()) v = static_cast<double>(rng() % 256);
    const auto bytes = covilearn::encode_png({px, 255.0});
    return {bytes.begin(), bytes.end()};
}

}  // namespace fixture
