#include "covilearn/preprocess.hpp"

#include <algorithm>
#include <cmath>

#include "covilearn/errors.hpp"

namespace covilearn {

namespace {

struct Tap {
    std::size_t lo, hi;
    double frac;
};

std::vector<Tap> taps(std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t o = 0; o < out; ++o) {
        double src = (static_cast<double>(o) + 0.5) * scale - 0.5;
        src = std::clamp(src, 0.0, static_cast<double>(in - 1));
        const auto lo = static_cast<std::size_t>(std::floor(src));
        t[o] = {lo, std::min(lo + 1, in - 1), src - static_cast<double>(lo)};
    }
    return t;
}

}  // namespace

Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width) {
    require_rank(image, 3, "resize_bilinear input");
    if (height == 0 || width == 0) throw ArgumentError("resize_bilinear: target extents must be positive");
    const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
    if (H == height && W == width) return image;
    const auto ty = taps(H, height), tx = taps(W, width);
    Tensor out(Shape{C, height, width});
    for (std::size_t c = 0; c < C; ++c) {
        const double* src = image.data().data() + c * H * W;
        double* dst = out.data().data() + c * height * width;
        for (std::size_t y = 0; y < height; ++y) {
            const Tap& a = ty[y];
            for (std::size_t x = 0; x < width; ++x) {
                const Tap& b = tx[x];
                const double top = src[a.lo * W + b.lo] * (1.0 - b.frac) + src[a.lo * W + b.hi] * b.frac;
                const double bottom = src[a.hi * W + b.lo] * (1.0 - b.frac) + src[a.hi * W + b.hi] * b.frac;
                dst[y * width + x] = top * (1.0 - a.frac) + bottom * a.frac;
            }
        }
    }
    return out;
}

Tensor preprocess(const RawImage& image, const PreprocessOptions& options) {
    const Tensor& raw = image.pixels;
    if (raw.empty()) throw ArgumentError("preprocess: zero-sized image");
    require_rank(raw, 3, "preprocess input");
    const std::size_t C = raw.dim(0), H = raw.dim(1), W = raw.dim(2);
    if (C != 1 && C != 3) throw ArgumentError("preprocess: expected 1 or 3 channels, got " + std::to_string(C));
    if (!(image.max_value > 0.0)) throw ArgumentError("preprocess: max_value must be positive");
    if (options.target_size == 0) throw ArgumentError("preprocess: target size must be positive");
    require_finite(raw, "preprocess input");

    Tensor rgb(Shape{3, H, W});
    for (std::size_t c = 0; c < 3; ++c) {
        const double* src = raw.data().data() + (C == 1 ? 0 : c) * H * W;
        double* dst = rgb.data().data() + c * H * W;
        for (std::size_t i = 0; i < H * W; ++i) dst[i] = std::clamp(src[i] / image.max_value, 0.0, 1.0);
    }
    Tensor out = resize_bilinear(rgb, options.target_size, options.target_size);
    if (options.subtract_mean) out = subtract_channel_mean(std::move(out), options.channel_mean);
    return out;
}

ChannelMean channel_means(std::span<const Tensor> images) {
    ChannelMean mean{0.0, 0.0, 0.0};
    if (images.empty()) return mean;
    std::size_t count = 0;
    for (const Tensor& img : images) {
        require_rank(img, 3, "channel_means input");
        if (img.dim(0) != 3) throw DimensionError("channel_means: expected 3 channels");
        const std::size_t hw = img.dim(1) * img.dim(2);
        for (std::size_t c = 0; c < 3; ++c)
            for (std::size_t i = 0; i < hw; ++i) mean[c] += img[c * hw + i];
        count += hw;
    }
    for (double& m : mean) m /= static_cast<double>(count);
    return mean;
}

Tensor subtract_channel_mean(Tensor image, const ChannelMean& mean) {
    require_rank(image, 3, "subtract_channel_mean input");
    const std::size_t hw = image.dim(1) * image.dim(2);
    for (std::size_t c = 0; c < image.dim(0); ++c)
        for (std::size_t i = 0; i < hw; ++i) image[c * hw + i] -= mean[c % 3];
    return image;
}

}  // namespace covilearn
