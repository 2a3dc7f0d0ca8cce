#include "covilearn/augment.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "covilearn/errors.hpp"
#include "covilearn/preprocess.hpp"

namespace covilearn {

AugmentParams draw_augmentation(const AugmentPolicy& policy, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto on = [&] { return unit(rng) < policy.probability; };
    auto between = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    AugmentParams p;
    // Every draw consumes the same number of variates so later fields do not
    // depend on earlier coin flips.
    const bool crop = on();
    const double crop_frac = between(policy.min_crop, 1.0), cx = unit(rng), cy = unit(rng);
    if (crop) {
        p.crop = crop_frac;
        p.crop_x = cx;
        p.crop_y = cy;
    }
    const bool hflip = on(), vflip = on();
    p.hflip = policy.horizontal_flip && hflip;
    p.vflip = policy.vertical_flip && vflip;
    const bool rot = on();
    const double rot_v = between(-policy.max_rotation_deg, policy.max_rotation_deg);
    if (rot) p.rotation_deg = rot_v;
    const bool shift = on();
    const double sx = between(-policy.max_shift, policy.max_shift), sy = between(-policy.max_shift, policy.max_shift);
    if (shift) {
        p.shift_x = sx;
        p.shift_y = sy;
    }
    const bool shear = on();
    const double shear_v = between(-policy.max_shear_deg, policy.max_shear_deg);
    if (shear) p.shear_deg = shear_v;
    const bool zoom = on();
    const double zoom_v = between(policy.min_zoom, policy.max_zoom);
    if (zoom) p.zoom = zoom_v;
    const bool aspect = on();
    const double aspect_v = between(policy.min_aspect, policy.max_aspect);
    if (aspect) p.aspect = aspect_v;
    const bool bright = on();
    const double bright_v = between(-policy.max_brightness, policy.max_brightness);
    if (bright) p.brightness = bright_v;
    const bool contrast = on();
    const double contrast_v = between(-policy.max_contrast, policy.max_contrast);
    if (contrast) p.contrast = contrast_v;
    const bool jitter = on();
    const std::uint64_t jitter_seed = rng();
    if (jitter) {
        p.jitter = policy.max_jitter;
        p.jitter_seed = jitter_seed;
    }
    return p;
}

namespace {

double sample_clamped(const double* plane, std::size_t H, std::size_t W, double y, double x) {
    y = std::clamp(y, 0.0, static_cast<double>(H - 1));
    x = std::clamp(x, 0.0, static_cast<double>(W - 1));
    const auto y0 = static_cast<std::size_t>(std::floor(y)), x0 = static_cast<std::size_t>(std::floor(x));
    const std::size_t y1 = std::min(y0 + 1, H - 1), x1 = std::min(x0 + 1, W - 1);
    const double fy = y - static_cast<double>(y0), fx = x - static_cast<double>(x0);
    const double top = plane[y0 * W + x0] * (1.0 - fx) + plane[y0 * W + x1] * fx;
    const double bottom = plane[y1 * W + x0] * (1.0 - fx) + plane[y1 * W + x1] * fx;
    return top * (1.0 - fy) + bottom * fy;
}

Tensor crop_and_resize(const Tensor& image, double fraction, double px, double py) {
    const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
    const auto ch = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fraction * static_cast<double>(H))));
    const auto cw = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(fraction * static_cast<double>(W))));
    if (ch == H && cw == W) return image;
    const auto oy = static_cast<std::size_t>(std::lround(std::clamp(py, 0.0, 1.0) * static_cast<double>(H - ch)));
    const auto ox = static_cast<std::size_t>(std::lround(std::clamp(px, 0.0, 1.0) * static_cast<double>(W - cw)));
    Tensor window(Shape{C, ch, cw});
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t y = 0; y < ch; ++y)
            for (std::size_t x = 0; x < cw; ++x)
                window[(c * ch + y) * cw + x] = image[(c * H + y + oy) * W + x + ox];
    return resize_bilinear(window, H, W);
}

bool is_identity_affine(const AugmentParams& p) {
    return p.rotation_deg == 0.0 && p.shift_x == 0.0 && p.shift_y == 0.0 && p.shear_deg == 0.0 && p.zoom == 1.0 &&
           p.aspect == 1.0;
}

// Output pixel q maps to source A^-1 (q - c - t) + c, with
// A = rotate * shear * scale(zoom*sqrt(aspect), zoom/sqrt(aspect)).
Tensor affine(const Tensor& image, const AugmentParams& p) {
    const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);
    const double rad = p.rotation_deg * std::numbers::pi / 180.0;
    const double shear = std::tan(p.shear_deg * std::numbers::pi / 180.0);
    const double sx = p.zoom * std::sqrt(p.aspect), sy = p.zoom / std::sqrt(p.aspect);
    // A = R * Sh * S, where Sh = [[1, shear], [0, 1]]
    const double cr = std::cos(rad), sr = std::sin(rad);
    const double a00 = cr * sx, a01 = (cr * shear - sr) * sy;
    const double a10 = sr * sx, a11 = (sr * shear + cr) * sy;
    const double det = a00 * a11 - a01 * a10;
    const double i00 = a11 / det, i01 = -a01 / det, i10 = -a10 / det, i11 = a00 / det;
    const double cx = (static_cast<double>(W) - 1.0) / 2.0, cy = (static_cast<double>(H) - 1.0) / 2.0;
    const double tx = p.shift_x * static_cast<double>(W), ty = p.shift_y * static_cast<double>(H);

    Tensor out(image.shape());
    for (std::size_t c = 0; c < C; ++c) {
        const double* src = image.data().data() + c * H * W;
        double* dst = out.data().data() + c * H * W;
        for (std::size_t y = 0; y < H; ++y) {
            for (std::size_t x = 0; x < W; ++x) {
                const double dx = static_cast<double>(x) - cx - tx, dy = static_cast<double>(y) - cy - ty;
                const double srcx = i00 * dx + i01 * dy + cx, srcy = i10 * dx + i11 * dy + cy;
                dst[y * W + x] = sample_clamped(src, H, W, srcy, srcx);
            }
        }
    }
    return out;
}

}  // namespace

Tensor apply_augmentation(const Tensor& image, const AugmentParams& p) {
    require_rank(image, 3, "augment input");
    if (!(p.zoom > 0.0) || !(p.aspect > 0.0)) throw ArgumentError("augment: zoom and aspect must be positive");
    if (!(p.crop > 0.0 && p.crop <= 1.0)) throw ArgumentError("augment: crop fraction must lie in (0,1]");
    const std::size_t C = image.dim(0), H = image.dim(1), W = image.dim(2);

    Tensor out = p.crop < 1.0 ? crop_and_resize(image, p.crop, p.crop_x, p.crop_y) : image;
    if (!is_identity_affine(p)) out = affine(out, p);
    if (p.hflip || p.vflip) {
        Tensor flipped(out.shape());
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t y = 0; y < H; ++y)
                for (std::size_t x = 0; x < W; ++x) {
                    const std::size_t sy = p.vflip ? H - 1 - y : y, sx = p.hflip ? W - 1 - x : x;
                    flipped[(c * H + y) * W + x] = out[(c * H + sy) * W + sx];
                }
        out = std::move(flipped);
    }
    if (p.contrast != 0.0) {
        for (std::size_t c = 0; c < C; ++c) {
            double* plane = out.data().data() + c * H * W;
            double mean = 0.0;
            for (std::size_t i = 0; i < H * W; ++i) mean += plane[i];
            mean /= static_cast<double>(H * W);
            for (std::size_t i = 0; i < H * W; ++i) plane[i] = (plane[i] - mean) * (1.0 + p.contrast) + mean;
        }
    }
    if (p.brightness != 0.0)
        for (double& v : out.data()) v += p.brightness;
    if (p.jitter != 0.0) {
        std::mt19937_64 rng(p.jitter_seed);
        std::uniform_real_distribution<double> noise(-p.jitter, p.jitter);
        for (double& v : out.data()) v += noise(rng);
    }
    for (double& v : out.data()) v = std::clamp(v, 0.0, 1.0);
    return out;
}

Sample augment(const Sample& sample, const AugmentPolicy& policy, std::uint64_t seed) {
    Sample out = sample;
    out.pixels = apply_augmentation(sample.pixels, draw_augmentation(policy, seed));
    return out;
}

}  // namespace covilearn
