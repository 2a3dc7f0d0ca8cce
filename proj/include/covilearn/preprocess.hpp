#pragma once

// Fixed preprocessing chain: gray -> 3 channels, divide by the sample-type
// maximum, bilinear resize, then optional per-channel mean subtraction.

#include <array>
#include <span>

#include "covilearn/image.hpp"
#include "covilearn/tensor.hpp"

namespace covilearn {

using ChannelMean = std::array<double, 3>;

struct PreprocessOptions {
    std::size_t target_size = 224;
    bool subtract_mean = false;
    ChannelMean channel_mean{0.0, 0.0, 0.0};
};

Tensor preprocess(const RawImage& image, const PreprocessOptions& options = {});

// Bilinear resampling of a (C,H,W) tensor with align-corners=false and
// edge-clamped source coordinates.
Tensor resize_bilinear(const Tensor& image, std::size_t height, std::size_t width);

// Per-channel mean over a set of preprocessed (3,H,W) images.
ChannelMean channel_means(std::span<const Tensor> images);

Tensor subtract_channel_mean(Tensor image, const ChannelMean& mean);

}  // namespace covilearn
