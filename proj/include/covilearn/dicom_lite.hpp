#pragma once

// Reader and writer for the DICOM subset produced by the acquisition side:
// Part-10 file (128-byte preamble + "DICM"), Explicit VR Little Endian,
// uncompressed, single frame, one sample per pixel, 8 or 16 bits allocated.

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "covilearn/image.hpp"

namespace covilearn {

struct DicomTag {
    std::uint16_t group = 0;
    std::uint16_t element = 0;

    std::uint32_t key() const { return (std::uint32_t{group} << 16) | element; }
    std::string to_string() const;
    friend auto operator<=>(const DicomTag&, const DicomTag&) = default;
};

struct DicomElement {
    DicomTag tag;
    std::string vr;  // two characters
    std::vector<std::uint8_t> value;
};

inline constexpr const char* kExplicitVrLittleEndian = "1.2.840.10008.1.2.1";

struct DicomLiteFile {
    std::array<std::uint8_t, 128> preamble{};
    std::vector<DicomElement> elements;  // every element in file order, pixel data included
    std::string transfer_syntax;
    std::uint16_t rows = 0;
    std::uint16_t columns = 0;
    std::uint16_t bits_allocated = 0;
    std::uint16_t bits_stored = 0;
    std::vector<std::uint8_t> pixel_data;

    const DicomElement* find(DicomTag tag) const;
    // Pixel values widened to 16 bits, row-major.
    std::vector<std::uint16_t> pixels() const;
};

bool looks_like_dicom(std::span<const std::uint8_t> bytes);

DicomLiteFile parse_dicom_lite(std::span<const std::uint8_t> bytes);

// Writes a minimal conformant file; `bits` is 8 or 16.
std::vector<std::uint8_t> emit_dicom_lite(std::uint16_t rows, std::uint16_t columns, std::uint16_t bits,
                                          std::span<const std::uint16_t> pixels);

// Grayscale raw image with max value 2^bits_stored - 1.
RawImage dicom_to_image(const DicomLiteFile& file);

}  // namespace covilearn
