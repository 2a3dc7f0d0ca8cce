#include "covilearn/image.hpp"

#include <csetjmp>
#include <cstdio>
#include <cstring>
#include <string>

#include <jpeglib.h>
#include <png.h>

#include "covilearn/dicom_lite.hpp"
#include "covilearn/errors.hpp"

namespace covilearn {

std::string_view to_string(ImageFormat format) {
    switch (format) {
        case ImageFormat::Png: return "png";
        case ImageFormat::Jpeg: return "jpeg";
        case ImageFormat::DicomLite: return "dicom";
        case ImageFormat::Unknown: return "unknown";
    }
    return "unknown";
}

ImageFormat sniff_image_format(std::span<const std::uint8_t> bytes) {
    static constexpr std::uint8_t kPng[8] = {0x89, 'P', 'N', 'G', '\r', '\n', 0x1A, '\n'};
    if (bytes.size() >= 8 && std::memcmp(bytes.data(), kPng, 8) == 0) return ImageFormat::Png;
    if (bytes.size() >= 3 && bytes[0] == 0xFF && bytes[1] == 0xD8 && bytes[2] == 0xFF) return ImageFormat::Jpeg;
    if (looks_like_dicom(bytes)) return ImageFormat::DicomLite;
    return ImageFormat::Unknown;
}

namespace {

RawImage from_interleaved(const std::uint8_t* data, std::size_t height, std::size_t width, std::size_t channels) {
    Tensor t(Shape{channels, height, width});
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < height * width; ++i) t[c * height * width + i] = data[i * channels + c];
    return {std::move(t), 255.0};
}

std::vector<std::uint8_t> to_interleaved(const RawImage& image, std::size_t& channels, std::size_t& height,
                                         std::size_t& width) {
    const Tensor& t = image.pixels;
    require_rank(t, 3, "image encoder");
    channels = t.dim(0);
    height = t.dim(1);
    width = t.dim(2);
    if (channels != 1 && channels != 3) throw ArgumentError("image encoder: expected 1 or 3 channels");
    if (!(image.max_value > 0.0)) throw ArgumentError("image encoder: max_value must be positive");
    std::vector<std::uint8_t> out(channels * height * width);
    for (std::size_t c = 0; c < channels; ++c)
        for (std::size_t i = 0; i < height * width; ++i) {
            double v = t[c * height * width + i] / image.max_value * 255.0;
            v = v < 0.0 ? 0.0 : (v > 255.0 ? 255.0 : v);
            out[i * channels + c] = static_cast<std::uint8_t>(v + 0.5);
        }
    return out;
}

RawImage decode_png(std::span<const std::uint8_t> bytes) {
    png_image image;
    std::memset(&image, 0, sizeof image);
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
        throw FormatError(std::string("invalid PNG: ") + image.message);
    const bool color = (image.format & PNG_FORMAT_FLAG_COLOR) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    std::vector<std::uint8_t> buffer(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buffer.data(), 0, nullptr)) {
        std::string msg = image.message;
        png_image_free(&image);
        throw FormatError("invalid PNG: " + msg);
    }
    if (image.width == 0 || image.height == 0) throw FormatError("invalid PNG: zero-sized image");
    return from_interleaved(buffer.data(), image.height, image.width, color ? 3 : 1);
}

struct JpegErrorManager {
    jpeg_error_mgr base;
    std::jmp_buf jump;
    char message[JMSG_LENGTH_MAX];
};

void jpeg_error_exit(j_common_ptr cinfo) {
    auto* err = reinterpret_cast<JpegErrorManager*>(cinfo->err);
    (*cinfo->err->format_message)(cinfo, err->message);
    std::longjmp(err->jump, 1);
}

// Corrupt-data warnings (truncation, bad markers) abort the decode.
void jpeg_emit_message(j_common_ptr cinfo, int level) {
    if (level < 0) jpeg_error_exit(cinfo);
}

RawImage decode_jpeg(std::span<const std::uint8_t> bytes) {
    jpeg_decompress_struct cinfo;
    JpegErrorManager err;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    err.base.emit_message = jpeg_emit_message;
    std::vector<std::uint8_t> buffer;
    std::size_t height = 0, width = 0, channels = 0;
    // No C++ objects with non-trivial destructors may be created between
    // setjmp and a longjmp back here.
    if (setjmp(err.jump)) {
        jpeg_destroy_decompress(&cinfo);
        throw FormatError(std::string("invalid JPEG: ") + err.message);
    }
    jpeg_create_decompress(&cinfo);
    jpeg_mem_src(&cinfo, bytes.data(), static_cast<unsigned long>(bytes.size()));
    jpeg_read_header(&cinfo, TRUE);
    cinfo.out_color_space = cinfo.num_components == 1 ? JCS_GRAYSCALE : JCS_RGB;
    jpeg_start_decompress(&cinfo);
    height = cinfo.output_height;
    width = cinfo.output_width;
    channels = static_cast<std::size_t>(cinfo.output_components);
    buffer.resize(height * width * channels);
    while (cinfo.output_scanline < cinfo.output_height) {
        JSAMPROW row = buffer.data() + static_cast<std::size_t>(cinfo.output_scanline) * width * channels;
        jpeg_read_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_decompress(&cinfo);
    jpeg_destroy_decompress(&cinfo);
    if (height == 0 || width == 0) throw FormatError("invalid JPEG: zero-sized image");
    return from_interleaved(buffer.data(), height, width, channels);
}

}  // namespace

RawImage decode_image(std::span<const std::uint8_t> bytes) {
    switch (sniff_image_format(bytes)) {
        case ImageFormat::Png: return decode_png(bytes);
        case ImageFormat::Jpeg: return decode_jpeg(bytes);
        case ImageFormat::DicomLite: return dicom_to_image(parse_dicom_lite(bytes));
        case ImageFormat::Unknown: break;
    }
    throw FormatError("unrecognized image format");
}

std::vector<std::uint8_t> encode_png(const RawImage& image) {
    std::size_t channels = 0, height = 0, width = 0;
    const auto pixels = to_interleaved(image, channels, height, width);
    png_image png;
    std::memset(&png, 0, sizeof png);
    png.version = PNG_IMAGE_VERSION;
    png.width = static_cast<png_uint_32>(width);
    png.height = static_cast<png_uint_32>(height);
    png.format = channels == 3 ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
    png_alloc_size_t size = 0;
    if (!png_image_write_to_memory(&png, nullptr, &size, 0, pixels.data(), 0, nullptr))
        throw FormatError(std::string("PNG encoding failed: ") + png.message);
    std::vector<std::uint8_t> out(size);
    if (!png_image_write_to_memory(&png, out.data(), &size, 0, pixels.data(), 0, nullptr))
        throw FormatError(std::string("PNG encoding failed: ") + png.message);
    out.resize(size);
    return out;
}

std::vector<std::uint8_t> encode_jpeg(const RawImage& image, int quality) {
    std::size_t channels = 0, height = 0, width = 0;
    const auto pixels = to_interleaved(image, channels, height, width);
    jpeg_compress_struct cinfo;
    JpegErrorManager err;
    cinfo.err = jpeg_std_error(&err.base);
    err.base.error_exit = jpeg_error_exit;
    unsigned char* mem = nullptr;
    unsigned long mem_size = 0;
    if (setjmp(err.jump)) {
        jpeg_destroy_compress(&cinfo);
        std::free(mem);
        throw FormatError(std::string("JPEG encoding failed: ") + err.message);
    }
    jpeg_create_compress(&cinfo);
    jpeg_mem_dest(&cinfo, &mem, &mem_size);
    cinfo.image_width = static_cast<JDIMENSION>(width);
    cinfo.image_height = static_cast<JDIMENSION>(height);
    cinfo.input_components = static_cast<int>(channels);
    cinfo.in_color_space = channels == 3 ? JCS_RGB : JCS_GRAYSCALE;
    jpeg_set_defaults(&cinfo);
    jpeg_set_quality(&cinfo, quality, TRUE);
    jpeg_start_compress(&cinfo, TRUE);
    while (cinfo.next_scanline < cinfo.image_height) {
        JSAMPROW row = const_cast<std::uint8_t*>(pixels.data()) +
                       static_cast<std::size_t>(cinfo.next_scanline) * width * channels;
        jpeg_write_scanlines(&cinfo, &row, 1);
    }
    jpeg_finish_compress(&cinfo);
    std::vector<std::uint8_t> out(mem, mem + mem_size);
    jpeg_destroy_compress(&cinfo);
    std::free(mem);
    return out;
}

}  // namespace covilearn
