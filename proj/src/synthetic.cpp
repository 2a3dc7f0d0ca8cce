#include "covilearn/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <random>

#include "covilearn/errors.hpp"
#include "covilearn/image.hpp"
#include "covilearn/weights_io.hpp"

namespace covilearn {

namespace {

Tensor make_gray(std::size_t size, Label label, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    Tensor img(Shape{1, size, size});
    const double noise_amp = 0.02;
    if (label == Label::Covid) {
        const double lo = 0.1 * unit(rng), hi = 0.9 + 0.1 * unit(rng);
        const int orientation = static_cast<int>(unit(rng) * 4.0);
        const double denom = static_cast<double>(size - 1);
        for (std::size_t y = 0; y < size; ++y)
            for (std::size_t x = 0; x < size; ++x) {
                double t = 0.0;
                switch (orientation) {
                    case 0: t = static_cast<double>(x) / denom; break;
                    case 1: t = 1.0 - static_cast<double>(x) / denom; break;
                    case 2: t = static_cast<double>(y) / denom; break;
                    default: t = 1.0 - static_cast<double>(y) / denom; break;
                }
                img[y * size + x] = lo + (hi - lo) * t;
            }
    } else {
        img.fill(0.4 + 0.2 * unit(rng));
    }
    for (double& v : img.data()) v = std::clamp(v + noise_amp * (2.0 * unit(rng) - 1.0), 0.0, 1.0);
    return img;
}

}  // namespace

std::vector<Sample> make_separable_samples(std::size_t count, std::size_t size, std::uint64_t seed) {
    if (size < 2) throw ArgumentError("synthetic images need size >= 2");
    std::mt19937_64 rng(seed);
    std::vector<Sample> out;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const Label label = i % 2 == 0 ? Label::Covid : Label::Normal;
        const Tensor gray = make_gray(size, label, rng);
        Tensor rgb(Shape{3, size, size});
        for (std::size_t c = 0; c < 3; ++c)
            std::copy(gray.data().begin(), gray.data().end(),
                      rgb.data().begin() + static_cast<std::ptrdiff_t>(c * size * size));
        out.push_back(make_sample(std::move(rgb), label));
    }
    return out;
}

DatasetManifest write_synthetic_dataset(const std::filesystem::path& dir, std::size_t count, std::size_t size,
                                        std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    std::mt19937_64 rng(seed);
    DatasetManifest manifest(dir);
    for (std::size_t i = 0; i < count; ++i) {
        const Label label = i % 2 == 0 ? Label::Covid : Label::Normal;
        char name[64];
        std::snprintf(name, sizeof name, "%s_%04zu.png", std::string(to_string(label)).c_str(), i);
        write_file_bytes(dir / name, encode_png({make_gray(size, label, rng), 1.0}));
        manifest.add(name, label);
    }
    manifest.write_csv(dir / "manifest.csv", false);
    return manifest;
}

}  // namespace covilearn
