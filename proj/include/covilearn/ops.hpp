#pragma once

// Layer-level forward kernels over NCHW tensors and their vector-Jacobian
// products. Every function is pure; inputs are never modified.

#include <cstdint>
#include <span>
#include <vector>

#include "covilearn/tensor.hpp"

namespace covilearn::ops {

enum class Padding { Valid, Same };

struct PadAmounts {
    std::size_t top = 0, bottom = 0, left = 0, right = 0;
};

struct Conv2dOptions {
    int stride = 1;
    Padding padding = Padding::Valid;
};

// `Same` pads so that the output extent is ceil(extent / stride); the total is
// split evenly with the odd cell going to bottom/right.
PadAmounts conv_padding(std::size_t h, std::size_t w, std::size_t kh, std::size_t kw, const Conv2dOptions& opts);

// Output spatial extents for a convolution; throws on invalid geometry.
std::pair<std::size_t, std::size_t> conv_output_extent(std::size_t h, std::size_t w, std::size_t kh, std::size_t kw,
                                                        const Conv2dOptions& opts);

// Cross-correlation. `bias` may be a default-constructed tensor for no bias.
Tensor conv2d(const Tensor& input, const Tensor& kernel, const Tensor& bias, const Conv2dOptions& opts);

struct Conv2dGrads {
    Tensor input, kernel, bias;
};
Conv2dGrads conv2d_backward(const Tensor& input, const Tensor& kernel, bool has_bias, const Tensor& grad_out,
                            const Conv2dOptions& opts);

Tensor zero_pad2d(const Tensor& input, const PadAmounts& pad);
Tensor zero_pad2d_backward(const Tensor& grad_out, const PadAmounts& pad);

Tensor batchnorm_infer(const Tensor& input, const Tensor& gamma, const Tensor& beta, const Tensor& mean,
                       const Tensor& var, double eps);

struct BatchNormGrads {
    Tensor input, gamma, beta, mean, var;
};
BatchNormGrads batchnorm_backward(const Tensor& input, const Tensor& gamma, const Tensor& mean, const Tensor& var,
                                  double eps, const Tensor& grad_out);

Tensor relu(const Tensor& input);
Tensor relu_backward(const Tensor& input, const Tensor& grad_out);

Tensor max_pool2d(const Tensor& input, int window, int stride);
Tensor max_pool2d_backward(const Tensor& input, int window, int stride, const Tensor& grad_out);

Tensor avg_pool2d(const Tensor& input, int window, int stride);
Tensor avg_pool2d_backward(const Shape& input_shape, int window, int stride, const Tensor& grad_out);

Tensor global_avg_pool(const Tensor& input);
Tensor global_avg_pool_backward(const Shape& input_shape, const Tensor& grad_out);

Tensor concat_channels(std::span<const Tensor* const> inputs);
Tensor concat_channels(std::span<const Tensor> inputs);
// Splits a channel-concatenated gradient back into per-input slices.
std::vector<Tensor> concat_channels_backward(std::span<const Shape> input_shapes, const Tensor& grad_out);

Tensor add(const Tensor& a, const Tensor& b);

Tensor dense_affine(const Tensor& input, const Tensor& weight, const Tensor& bias);

struct DenseGrads {
    Tensor input, weight, bias;
};
DenseGrads dense_affine_backward(const Tensor& input, const Tensor& weight, const Tensor& grad_out);

Tensor flatten(const Tensor& input);

enum class DropoutMode { Train, Infer };

// Per-element scale factors: 0 for dropped elements, 1/(1-rate) for survivors.
Tensor dropout_mask(const Shape& shape, double rate, std::uint64_t seed);
Tensor dropout(const Tensor& input, double rate, DropoutMode mode, std::uint64_t seed);

Tensor softmax(const Tensor& logits);
Tensor softmax_backward(const Tensor& output, const Tensor& grad_out);

// Elementwise product with a constant tensor of the same shape.
Tensor multiply(const Tensor& a, const Tensor& b);

}  // namespace covilearn::ops
