#pragma once

// Image decoding seam: PNG and JPEG go through libpng / libjpeg, DICOM-lite
// through the native parser. Formats are sniffed from magic bytes.

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include "covilearn/tensor.hpp"

namespace covilearn {

// Undecoded pixel values (C,H,W) with the maximum value of their sample type.
struct RawImage {
    Tensor pixels;
    double max_value = 255.0;
};

enum class ImageFormat { Png, Jpeg, DicomLite, Unknown };

std::string_view to_string(ImageFormat format);
ImageFormat sniff_image_format(std::span<const std::uint8_t> bytes);

// Throws FormatError("unrecognized image format") for anything else.
RawImage decode_image(std::span<const std::uint8_t> bytes);

// 8-bit PNG, grayscale for 1 channel or RGB for 3; values are clamped and
// rounded from [0, max_value] into [0, 255].
std::vector<std::uint8_t> encode_png(const RawImage& image);
std::vector<std::uint8_t> encode_jpeg(const RawImage& image, int quality = 95);

}  // namespace covilearn
