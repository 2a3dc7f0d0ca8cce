#include "covilearn/ops.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "covilearn/errors.hpp"

namespace covilearn::ops {

namespace {

std::string dims(const Tensor& t) { return shape_to_string(t.shape()); }

void require_positive(int value, const char* what) {
    if (value <= 0) throw ArgumentError(std::string(what) + " must be positive, got " + std::to_string(value));
}

// Range of output columns [lo, hi) whose input coordinate o*stride + offset - pad
// lands inside [0, extent).
std::pair<std::size_t, std::size_t> valid_range(std::size_t out_extent, std::size_t stride, std::size_t offset,
                                                std::size_t pad, std::size_t extent) {
    // o*stride + offset >= pad  and  o*stride + offset < pad + extent
    std::size_t lo = 0;
    if (offset < pad) lo = (pad - offset + stride - 1) / stride;
    std::size_t hi = 0;
    if (pad + extent > offset) hi = (pad + extent - offset + stride - 1) / stride;
    hi = std::min(hi, out_extent);
    if (lo > hi) lo = hi;
    return {lo, hi};
}

}  // namespace

PadAmounts conv_padding(std::size_t h, std::size_t w, std::size_t kh, std::size_t kw, const Conv2dOptions& opts) {
    require_positive(opts.stride, "conv2d stride");
    if (opts.padding == Padding::Valid) return {};
    const auto stride = static_cast<std::size_t>(opts.stride);
    auto total = [stride](std::size_t extent, std::size_t k) -> std::size_t {
        const std::size_t out = (extent + stride - 1) / stride;
        const std::size_t needed = (out - 1) * stride + k;
        return needed > extent ? needed - extent : 0;
    };
    const std::size_t th = total(h, kh), tw = total(w, kw);
    return {th / 2, th - th / 2, tw / 2, tw - tw / 2};
}

std::pair<std::size_t, std::size_t> conv_output_extent(std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
                                                        const Conv2dOptions& opts) {
    const PadAmounts pad = conv_padding(h, w, kh, kw, opts);
    const std::size_t ph = h + pad.top + pad.bottom, pw = w + pad.left + pad.right;
    if (kh > ph || kw > pw) {
        std::ostringstream os;
        os << "conv2d: kernel " << kh << 'x' << kw << " exceeds padded input " << ph << 'x' << pw;
        throw DimensionError(os.str());
    }
    const auto s = static_cast<std::size_t>(opts.stride);
    return {(ph - kh) / s + 1, (pw - kw) / s + 1};
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, const Conv2dOptions& opts) {
    require_rank(input, 4, "conv2d input");
    require_rank(kernel, 4, "conv2d kernel");
    const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const std::size_t F = kernel.dim(0), KH = kernel.dim(2), KW = kernel.dim(3);
    if (kernel.dim(1) != C) {
        throw DimensionError("conv2d: kernel " + dims(kernel) + " expects " + std::to_string(kernel.dim(1)) +
                             " input channels, input " + dims(input) + " has " + std::to_string(C));
    }
    const bool has_bias = !bias.empty();
    if (has_bias && (bias.rank() != 1 || bias.dim(0) != F))
        throw DimensionError("conv2d: bias " + dims(bias) + " does not match " + std::to_string(F) + " filters");

    const auto [OH, OW] = conv_output_extent(H, W, KH, KW, opts);
    const PadAmounts pad = conv_padding(H, W, KH, KW, opts);
    const auto s = static_cast<std::size_t>(opts.stride);

    Tensor out(Shape{N, F, OH, OW});
    const double* x = input.data().data();
    const double* k = kernel.data().data();
    double* y = out.data().data();

    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t f = 0; f < F; ++f) {
            double* plane = y + (n * F + f) * OH * OW;
            std::fill(plane, plane + OH * OW, has_bias ? bias[f] : 0.0);
            for (std::size_t c = 0; c < C; ++c) {
                const double* xin = x + (n * C + c) * H * W;
                const double* kf = k + ((f * C + c) * KH) * KW;
                for (std::size_t i = 0; i < KH; ++i) {
                    const auto [oh_lo, oh_hi] = valid_range(OH, s, i, pad.top, H);
                    for (std::size_t j = 0; j < KW; ++j) {
                        const double wv = kf[i * KW + j];
                        const auto [ow_lo, ow_hi] = valid_range(OW, s, j, pad.left, W);
                        for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
                            const double* row = xin + (oh * s + i - pad.top) * W;
                            double* orow = plane + oh * OW;
                            for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) orow[ow] += wv * row[ow * s + j - pad.left];
                        }
                    }
                }
            }
        }
    }
    return out;
}

Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel, bool has_bias, const Tensor& grad_out,
                            const Conv2dOptions& opts) {
    const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const std::size_t F = kernel.dim(0), KH = kernel.dim(2), KW = kernel.dim(3);
    const auto [OH, OW] = conv_output_extent(H, W, KH, KW, opts);
    if (grad_out.shape() != Shape{N, F, OH, OW})
        throw DimensionError("conv2d backward: gradient " + dims(grad_out) + " does not match output");
    const PadAmounts pad = conv_padding(H, W, KH, KW, opts);
    const auto s = static_cast<std::size_t>(opts.stride);

    Conv2dGrads g{Tensor(input.shape()), Tensor(kernel.shape()), has_bias ? Tensor(Shape{F}) : Tensor()};
    const double* x = input.data().data();
    const double* k = kernel.data().data();
    const double* gy = grad_out.data().data();
    double* gx = g.input.data().data();
    double* gk = g.kernel.data().data();

    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t f = 0; f < F; ++f) {
            const double* gplane = gy + (n * F + f) * OH * OW;
            if (has_bias) {
                double acc = 0.0;
                for (std::size_t q = 0; q < OH * OW; ++q) acc += gplane[q];
                g.bias[f] += acc;
            }
            for (std::size_t c = 0; c < C; ++c) {
                const double* xin = x + (n * C + c) * H * W;
                double* gxin = gx + (n * C + c) * H * W;
                const std::size_t kbase = ((f * C + c) * KH) * KW;
                for (std::size_t i = 0; i < KH; ++i) {
                    const auto [oh_lo, oh_hi] = valid_range(OH, s, i, pad.top, H);
                    for (std::size_t j = 0; j < KW; ++j) {
                        const auto [ow_lo, ow_hi] = valid_range(OW, s, j, pad.left, W);
                        const double wv = k[kbase + i * KW + j];
                        double acc = 0.0;
                        for (std::size_t oh = oh_lo; oh < oh_hi; ++oh) {
                            const std::size_t roff = (oh * s + i - pad.top) * W;
                            const double* grow = gplane + oh * OW;
                            for (std::size_t ow = ow_lo; ow < ow_hi; ++ow) {
                                const std::size_t idx = roff + ow * s + j - pad.left;
                                acc += grow[ow] * xin[idx];
                                gxin[idx] += grow[ow] * wv;
                            }
                        }
                        gk[kbase + i * KW + j] += acc;
                    }
                }
            }
        }
    }
    return g;
}

Tensor zero_pad2d(const Tensor& input, const PadAmounts& pad) {
    require_rank(input, 4, "zero_pad2d input");
    const std::size_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
    const std::size_t OH = H + pad.top + pad.bottom, OW = W + pad.left + pad.right;
    Tensor out(Shape{N, C, OH, OW});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t h = 0; h < H; ++h)
                for (std::size_t w = 0; w < W; ++w) out.at(n, c, h + pad.top, w + pad.left) = input.at(n, c, h, w);
    return out;
}

Tensor zero_pad2d_backward(const Tensor& grad_out, const PadAmounts& pad) {
    const std::size_t N = grad_out.dim(0), C = grad_out.dim(1);
    const std::size_t H = grad_out.dim(2) - pad.top - pad.bottom, W = grad_out.dim(3) - pad.left - pad.right;
    Tensor g(Shape{N, C, H, W});
    for (std::size_t n = 0; n < N; ++n)
        for (std::size_t c = 0; c < C; ++c)
            for (std::size_t h = 0; h < H; ++h)
                for (std::size_t w = 0; w < W; ++w) g.at(n, c, h, w) = grad_out.at(n, c, h + pad.top, w + pad.left);
    return g;
}

namespace {

void check_channel_stats(const Tensor& input, std::initializer_list<const Tensor*> stats, double eps) {
    require_rank(input, 4, "batchnorm input");
    const std::size_t C = input.dim(1);
    for (const Tensor* t : stats) {
        if (t->rank() != 1 || t->dim(0) != C)
            throw DimensionError("batchnorm: statistic " + dims(*t) + " does not match " + std::to_string(C) +
                                 " channels");
    }
    if (!(eps >= 0.0)) throw ArgumentError("batchnorm: eps must be non-negative");
}

}  // namespace

Tensor batchnorm_infer(const Tensor& input, const Tensor& gamma, const Tensor& beta, const Tensor& mean,
                       const Tensor& var, double eps) {
    check_channel_stats(input, {&gamma, &beta, &mean, &var}, eps);
    const std::size_t N = input.dim(0), C = input.dim(1), HW = input.dim(2) * input.dim(3);
    for (std::size_t c = 0; c < C; ++c) {
        if (var[c] < 0.0) throw ArgumentError("batchnorm: negative variance on channel " + std::to_string(c));
        if (var[c] + eps <= 0.0)
            throw ArgumentError("batchnorm: var + eps is zero on channel " + std::to_string(c));
    }
    Tensor out(input.shape());
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t c = 0; c < C; ++c) {
            const double sd = std::sqrt(var[c] + eps);
            const double* x = input.data().data() + (n * C + c) * HW;
            double* y = out.data().data() + (n * C + c) * HW;
            for (std::size_t q = 0; q < HW; ++q) y[q] = gamma[c] * (x[q] - mean[c]) / sd + beta[c];
        }
    }
    return out;
}

BatchNormGrads batchnorm_backward(const Tensor& input, const Tensor& gamma, const Tensor& mean, const Tensor& var,
                                  double eps, const Tensor& grad_out) {
    const std::size_t N = input.dim(0), C = input.dim(1), HW = input.dim(2) * input.dim(3);
    BatchNormGrads g{Tensor(input.shape()), Tensor(Shape{C}), Tensor(Shape{C}), Tensor(Shape{C}), Tensor(Shape{C})};
    for (std::size_t c = 0; c < C; ++c) {
        const double denom = var[c] + eps;
        const double sd = std::sqrt(denom);
        double sum_g = 0.0, sum_gx = 0.0;
        for (std::size_t n = 0; n < N; ++n) {
            const double* x = input.data().data() + (n * C + c) * HW;
            const double* gy = grad_out.data().data() + (n * C + c) * HW;
            double* gx = g.input.data().data() + (n * C + c) * HW;
            for (std::size_t q = 0; q < HW; ++q) {
                sum_g += gy[q];
                sum_gx += gy[q] * (x[q] - mean[c]);
                gx[q] = gy[q] * gamma[c] / sd;
            }
        }
        g.beta[c] = sum_g;
        g.gamma[c] = sum_gx / sd;
        g.mean[c] = -gamma[c] * sum_g / sd;
        g.var[c] = -0.5 * gamma[c] * sum_gx / (denom * sd);
    }
    return g;
}

Tensor relu(const Tensor& input) {
    Tensor out = input;
    for (double& v : out.data()) v = v > 0.0 ? v : 0.0;
    return out;
}

Tensor relu_backward(const Tensor& input, const Tensor& grad_out) {
    Tensor g = grad_out;
    for (std::size_t i = 0; i < g.size(); ++i)
        if (!(input[i] > 0.0)) g[i] = 0.0;
    return g;
}

namespace {

struct PoolGeometry {
    std::size_t N, C, H, W, OH, OW, window, stride;
};

PoolGeometry pool_geometry(const Shape& shape, int window, int stride, const char* what) {
    if (shape.size() != 4) throw DimensionError(std::string(what) + ": expected NCHW input, got " + shape_to_string(shape));
    require_positive(window, "pool window");
    require_positive(stride, "pool stride");
    const auto k = static_cast<std::size_t>(window), s = static_cast<std::size_t>(stride);
    if (k > shape[2] || k > shape[3]) {
        std::ostringstream os;
        os << what << ": window " << k << " larger than input " << shape[2] << 'x' << shape[3];
        throw ArgumentError(os.str());
    }
    return {shape[0], shape[1], shape[2], shape[3], (shape[2] - k) / s + 1, (shape[3] - k) / s + 1, k, s};
}

}  // namespace

Tensor max_pool2d(const Tensor& input, int window, int stride) {
    const PoolGeometry p = pool_geometry(input.shape(), window, stride, "max_pool2d");
    Tensor out(Shape{p.N, p.C, p.OH, p.OW});
    for (std::size_t n = 0; n < p.N; ++n)
        for (std::size_t c = 0; c < p.C; ++c)
            for (std::size_t oh = 0; oh < p.OH; ++oh)
                for (std::size_t ow = 0; ow < p.OW; ++ow) {
                    double best = -std::numeric_limits<double>::infinity();
                    for (std::size_t i = 0; i < p.window; ++i)
                        for (std::size_t j = 0; j < p.window; ++j)
                            best = std::max(best, input.at(n, c, oh * p.stride + i, ow * p.stride + j));
                    out.at(n, c, oh, ow) = best;
                }
    return out;
}

Tensor max_pool2d_backward(const Tensor& input, int window, int stride, const Tensor& grad_out) {
    const PoolGeometry p = pool_geometry(input.shape(), window, stride, "max_pool2d");
    Tensor g(input.shape());
    for (std::size_t n = 0; n < p.N; ++n)
        for (std::size_t c = 0; c < p.C; ++c)
            for (std::size_t oh = 0; oh < p.OH; ++oh)
                for (std::size_t ow = 0; ow < p.OW; ++ow) {
                    std::size_t bi = oh * p.stride, bj = ow * p.stride;
                    double best = input.at(n, c, bi, bj);
                    for (std::size_t i = 0; i < p.window; ++i)
                        for (std::size_t j = 0; j < p.window; ++j) {
                            const double v = input.at(n, c, oh * p.stride + i, ow * p.stride + j);
                            if (v > best) {
                                best = v;
                                bi = oh * p.stride + i;
                                bj = ow * p.stride + j;
                            }
                        }
                    g.at(n, c, bi, bj) += grad_out.at(n, c, oh, ow);
                }
    return g;
}

Tensor avg_pool2d(const Tensor& input, int window, int stride) {
    const PoolGeometry p = pool_geometry(input.shape(), window, stride, "avg_pool2d");
    const double inv = 1.0 / static_cast<double>(p.window * p.window);
    Tensor out(Shape{p.N, p.C, p.OH, p.OW});
    for (std::size_t n = 0; n < p.N; ++n)
        for (std::size_t c = 0; c < p.C; ++c)
            for (std::size_t oh = 0; oh < p.OH; ++oh)
                for (std::size_t ow = 0; ow < p.OW; ++ow) {
                    double acc = 0.0;
                    for (std::size_t i = 0; i < p.window; ++i)
                        for (std::size_t j = 0; j < p.window; ++j)
                            acc += input.at(n, c, oh * p.stride + i, ow * p.stride + j);
                    out.at(n, c, oh, ow) = acc * inv;
                }
    return out;
}

Tensor avg_pool2d_backward(const Shape& input_shape, int window, int stride, const Tensor& grad_out) {
    const PoolGeometry p = pool_geometry(input_shape, window, stride, "avg_pool2d");
    const double inv = 1.0 / static_cast<double>(p.window * p.window);
    Tensor g(input_shape);
    for (std::size_t n = 0; n < p.N; ++n)
        for (std::size_t c = 0; c < p.C; ++c)
            for (std::size_t oh = 0; oh < p.OH; ++oh)
                for (std::size_t ow = 0; ow < p.OW; ++ow) {
                    const double share = grad_out.at(n, c, oh, ow) * inv;
                    for (std::size_t i = 0; i < p.window; ++i)
                        for (std::size_t j = 0; j < p.window; ++j)
                            g.at(n, c, oh * p.stride + i, ow * p.stride + j) += share;
                }
    return g;
}

Tensor global_avg_pool(const Tensor& input) {
    require_rank(input, 4, "global_avg_pool input");
    const std::size_t N = input.dim(0), C = input.dim(1), HW = input.dim(2) * input.dim(3);
    Tensor out(Shape{N, C});
    for (std::size_t nc = 0; nc < N * C; ++nc) {
        const double* x = input.data().data() + nc * HW;
        double acc = 0.0;
        for (std::size_t q = 0; q < HW; ++q) acc += x[q];
        out[nc] = acc / static_cast<double>(HW);
    }
    return out;
}

Tensor global_avg_pool_backward(const Shape& input_shape, const Tensor& grad_out) {
    const std::size_t HW = input_shape[2] * input_shape[3];
    Tensor g(input_shape);
    for (std::size_t nc = 0; nc < grad_out.size(); ++nc) {
        const double share = grad_out[nc] / static_cast<double>(HW);
        double* gx = g.data().data() + nc * HW;
        std::fill(gx, gx + HW, share);
    }
    return g;
}

Tensor concat_channels(std::span<const Tensor* const> inputs) {
    if (inputs.empty()) throw ArgumentError("concat_channels: no inputs");
    const Tensor& first = *inputs.front();
    require_rank(first, 4, "concat_channels input");
    const std::size_t N = first.dim(0), H = first.dim(2), W = first.dim(3);
    std::size_t total = 0;
    for (const Tensor* t : inputs) {
        require_rank(*t, 4, "concat_channels input");
        if (t->dim(0) != N || t->dim(2) != H || t->dim(3) != W)
            throw DimensionError("concat_channels: " + dims(*t) + " does not share N,H,W with " + dims(first));
        total += t->dim(1);
    }
    Tensor out(Shape{N, total, H, W});
    double* dst = out.data().data();
    for (std::size_t n = 0; n < N; ++n) {
        for (const Tensor* t : inputs) {
            const std::size_t block = t->dim(1) * H * W;
            const double* src = t->data().data() + n * block;
            dst = std::copy(src, src + block, dst);
        }
    }
    return out;
}

Tensor concat_channels(std::span<const Tensor> inputs) {
    std::vector<const Tensor*> ptrs;
    ptrs.reserve(inputs.size());
    for (const Tensor& t : inputs) ptrs.push_back(&t);
    return concat_channels(std::span<const Tensor* const>(ptrs));
}

std::vector<Tensor> concat_channels_backward(std::span<const Shape> input_shapes, const Tensor& grad_out) {
    std::vector<Tensor> grads;
    grads.reserve(input_shapes.size());
    for (const Shape& s : input_shapes) grads.emplace_back(s);
    const std::size_t N = grad_out.dim(0);
    const double* src = grad_out.data().data();
    for (std::size_t n = 0; n < N; ++n) {
        for (Tensor& g : grads) {
            const std::size_t block = g.size() / N;
            std::copy(src, src + block, g.data().data() + n * block);
            src += block;
        }
    }
    return grads;
}

Tensor add(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw DimensionError("add: shapes " + dims(a) + " and " + dims(b) + " differ");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i];
    return out;
}

Tensor multiply(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) throw DimensionError("multiply: shapes " + dims(a) + " and " + dims(b) + " differ");
    Tensor out = a;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
    return out;
}

Tensor dense_affine(const Tensor& input, const Tensor& weight, const Tensor& bias) {
    require_rank(input, 2, "dense input");
    require_rank(weight, 2, "dense weight");
    const std::size_t N = input.dim(0), D = input.dim(1), K = weight.dim(1);
    if (weight.dim(0) != D)
        throw DimensionError("dense: input " + dims(input) + " inner dimension does not match weight " + dims(weight));
    if (bias.rank() != 1 || bias.dim(0) != K)
        throw DimensionError("dense: bias " + dims(bias) + " does not match " + std::to_string(K) + " units");
    Tensor out(Shape{N, K});
    for (std::size_t n = 0; n < N; ++n) {
        double* y = out.data().data() + n * K;
        for (std::size_t k = 0; k < K; ++k) y[k] = bias[k];
        for (std::size_t d = 0; d < D; ++d) {
            const double xv = input[n * D + d];
            const double* wrow = weight.data().data() + d * K;
            for (std::size_t k = 0; k < K; ++k) y[k] += xv * wrow[k];
        }
    }
    return out;
}

DenseGrads dense_affine_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out) {
    const std::size_t N = input.dim(0), D = input.dim(1), K = weight.dim(1);
    DenseGrads g{Tensor(input.shape()), Tensor(weight.shape()), Tensor(Shape{K})};
    for (std::size_t n = 0; n < N; ++n) {
        const double* gy = grad_out.data().data() + n * K;
        for (std::size_t k = 0; k < K; ++k) g.bias[k] += gy[k];
        for (std::size_t d = 0; d < D; ++d) {
            const double xv = input[n * D + d];
            const double* wrow = weight.data().data() + d * K;
            double* gwrow = g.weight.data().data() + d * K;
            double acc = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                gwrow[k] += xv * gy[k];
                acc += wrow[k] * gy[k];
            }
            g.input[n * D + d] = acc;
        }
    }
    return g;
}

Tensor flatten(const Tensor& input) {
    const std::size_t N = input.dim(0);
    return input.reshaped(Shape{N, input.size() / N});
}

Tensor dropout_mask(const Shape& shape, double rate, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ArgumentError("dropout: rate must lie in [0,1), got " + std::to_string(rate));
    Tensor mask(shape, 1.0);
    if (rate == 0.0) return mask;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double keep_scale = 1.0 / (1.0 - rate);
    for (double& m : mask.data()) m = unit(rng) < rate ? 0.0 : keep_scale;
    return mask;
}

Tensor dropout(const Tensor& input, double rate, DropoutMode mode, std::uint64_t seed) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ArgumentError("dropout: rate must lie in [0,1), got " + std::to_string(rate));
    if (mode == DropoutMode::Infer || rate == 0.0) return input;
    return multiply(input, dropout_mask(input.shape(), rate, seed));
}

Tensor softmax(const Tensor& logits) {
    require_rank(logits, 2, "softmax logits");
    for (double v : logits.data())
        if (std::isnan(v)) throw ArgumentError("softmax: NaN logit");
    const std::size_t N = logits.dim(0), K = logits.dim(1);
    Tensor out(logits.shape());
    for (std::size_t n = 0; n < N; ++n) {
        const double* z = logits.data().data() + n * K;
        double* p = out.data().data() + n * K;
        const double zmax = *std::max_element(z, z + K);
        double total = 0.0;
        for (std::size_t k = 0; k < K; ++k) {
            p[k] = std::exp(z[k] - zmax);
            total += p[k];
        }
        for (std::size_t k = 0; k < K; ++k) p[k] /= total;
    }
    return out;
}

Tensor softmax_backward(const Tensor& output, const Tensor& grad_out) {
    const std::size_t N = output.dim(0), K = output.dim(1);
    Tensor g(output.shape());
    for (std::size_t n = 0; n < N; ++n) {
        const double* y = output.data().data() + n * K;
        const double* gy = grad_out.data().data() + n * K;
        double dot = 0.0;
        for (std::size_t k = 0; k < K; ++k) dot += gy[k] * y[k];
        for (std::size_t k = 0; k < K; ++k) g[n * K + k] = y[k] * (gy[k] - dot);
    }
    return g;
}

}  // namespace covilearn::ops
