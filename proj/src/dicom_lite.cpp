#include "covilearn/dicom_lite.hpp"

#include <algorithm>
#include <cstdio>
#include <cctype>
#include <cstring>
#include <map>

#include "covilearn/errors.hpp"

namespace covilearn {

namespace {

constexpr DicomTag kMetaGroupLength{0x0002, 0x0000};
constexpr DicomTag kTransferSyntax{0x0002, 0x0010};
constexpr DicomTag kSamplesPerPixel{0x0028, 0x0002};
constexpr DicomTag kNumberOfFrames{0x0028, 0x0008};
constexpr DicomTag kRows{0x0028, 0x0010};
constexpr DicomTag kColumns{0x0028, 0x0011};
constexpr DicomTag kBitsAllocated{0x0028, 0x0100};
constexpr DicomTag kBitsStored{0x0028, 0x0101};
constexpr DicomTag kPixelRepresentation{0x0028, 0x0103};
constexpr DicomTag kPixelData{0x7FE0, 0x0010};

constexpr std::uint32_t kUndefinedLength = 0xFFFFFFFF;

bool has_long_length(std::string_view vr) {
    static constexpr std::string_view kLong[] = {"OB", "OD", "OF", "OL", "OV", "OW", "SQ",
                                                 "SV", "UC", "UN", "UR", "UT", "UV"};
    return std::find(std::begin(kLong), std::end(kLong), vr) != std::end(kLong);
}

std::string syntax_name(const std::string& uid) {
    static const std::map<std::string, std::string> names = {
        {"1.2.840.10008.1.2", "Implicit VR Little Endian"},
        {"1.2.840.10008.1.2.1", "Explicit VR Little Endian"},
        {"1.2.840.10008.1.2.1.99", "Deflated Explicit VR Little Endian"},
        {"1.2.840.10008.1.2.2", "Explicit VR Big Endian"},
        {"1.2.840.10008.1.2.4.50", "JPEG Baseline (Process 1)"},
        {"1.2.840.10008.1.2.4.51", "JPEG Extended (Process 2 & 4)"},
        {"1.2.840.10008.1.2.4.57", "JPEG Lossless, Non-Hierarchical (Process 14)"},
        {"1.2.840.10008.1.2.4.70", "JPEG Lossless, First-Order Prediction"},
        {"1.2.840.10008.1.2.4.80", "JPEG-LS Lossless"},
        {"1.2.840.10008.1.2.4.81", "JPEG-LS Near-Lossless"},
        {"1.2.840.10008.1.2.4.90", "JPEG 2000 Lossless"},
        {"1.2.840.10008.1.2.4.91", "JPEG 2000"},
        {"1.2.840.10008.1.2.5", "RLE Lossless"},
    };
    auto it = names.find(uid);
    return it == names.end() ? "transfer syntax " + uid : it->second + " (" + uid + ")";
}

std::string trim_value(const std::vector<std::uint8_t>& v) {
    std::string s(v.begin(), v.end());
    while (!s.empty() && (s.back() == '\0' || s.back() == ' ')) s.pop_back();
    return s;
}

std::uint16_t read_u16(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t at) {
    return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
           (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

std::uint16_t us_value(const DicomElement& e) {
    if (e.value.size() < 2) throw FormatError("element " + e.tag.to_string() + " too short for US value");
    return read_u16(e.value, 0);
}

}  // namespace

std::string DicomTag::to_string() const {
    char buf[16];
    std::snprintf(buf, sizeof buf, "(%04X,%04X)", group, element);
    return buf;
}

const DicomElement* DicomLiteFile::find(DicomTag tag) const {
    for (const auto& e : elements)
        if (e.tag == tag) return &e;
    return nullptr;
}

std::vector<std::uint16_t> DicomLiteFile::pixels() const {
    const std::size_t n = std::size_t{rows} * columns;
    std::vector<std::uint16_t> out(n);
    if (bits_allocated == 8) {
        for (std::size_t i = 0; i < n; ++i) out[i] = pixel_data[i];
    } else {
        for (std::size_t i = 0; i < n; ++i) out[i] = read_u16(pixel_data, 2 * i);
    }
    return out;
}

bool looks_like_dicom(std::span<const std::uint8_t> bytes) {
    return bytes.size() >= 132 && std::memcmp(bytes.data() + 128, "DICM", 4) == 0;
}

DicomLiteFile parse_dicom_lite(std::span<const std::uint8_t> bytes) {
    if (!looks_like_dicom(bytes)) throw FormatError("not a DICOM file: missing 'DICM' marker after 128-byte preamble");
    DicomLiteFile file;
    std::copy_n(bytes.begin(), 128, file.preamble.begin());

    std::size_t pos = 132;
    bool syntax_checked = false;
    auto check_syntax = [&] {
        if (syntax_checked) return;
        syntax_checked = true;
        if (file.transfer_syntax.empty()) throw FormatError("DICOM meta header lacks a transfer syntax (0002,0010)");
        if (file.transfer_syntax != kExplicitVrLittleEndian)
            throw UnsupportedFeatureError("unsupported DICOM transfer syntax: " + syntax_name(file.transfer_syntax) +
                                          "; only Explicit VR Little Endian is supported");
    };

    while (pos < bytes.size()) {
        if (bytes.size() - pos < 8) throw FormatError("truncated DICOM element header at byte " + std::to_string(pos));
        DicomElement e;
        e.tag = {read_u16(bytes, pos), read_u16(bytes, pos + 2)};
        if (e.tag.group != 0x0002) check_syntax();
        e.vr.assign(reinterpret_cast<const char*>(bytes.data() + pos + 4), 2);
        if (!std::isupper(static_cast<unsigned char>(e.vr[0])) || !std::isupper(static_cast<unsigned char>(e.vr[1])))
            throw FormatError("element " + e.tag.to_string() + " has invalid VR; expected explicit VR encoding");
        std::uint32_t length = 0;
        if (has_long_length(e.vr)) {
            if (bytes.size() - pos < 12) throw FormatError("truncated DICOM element header for " + e.tag.to_string());
            length = read_u32(bytes, pos + 8);
            pos += 12;
        } else {
            length = read_u16(bytes, pos + 6);
            pos += 8;
        }
        if (length == kUndefinedLength) {
            if (e.tag == kPixelData)
                throw UnsupportedFeatureError("encapsulated (compressed) pixel data is not supported");
            throw UnsupportedFeatureError("undefined-length element " + e.tag.to_string() + " (" + e.vr +
                                          ") is not supported");
        }
        const std::size_t available = bytes.size() - pos;
        if (length > available) {
            if (e.tag == kPixelData)
                throw FormatError("truncated pixel data: expected " + std::to_string(length) + " bytes, got " +
                                  std::to_string(available));
            throw FormatError("element " + e.tag.to_string() + " truncated: expected " + std::to_string(length) +
                              " bytes, got " + std::to_string(available));
        }
        e.value.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos),
                       bytes.begin() + static_cast<std::ptrdiff_t>(pos + length));
        pos += length;
        if (e.tag == kTransferSyntax) file.transfer_syntax = trim_value(e.value);
        file.elements.push_back(std::move(e));
    }
    check_syntax();

    auto required = [&](DicomTag tag, const char* what) -> const DicomElement& {
        const DicomElement* e = file.find(tag);
        if (!e) throw FormatError(std::string("DICOM file lacks ") + what + " " + tag.to_string());
        return *e;
    };
    file.rows = us_value(required(kRows, "Rows"));
    file.columns = us_value(required(kColumns, "Columns"));
    file.bits_allocated = us_value(required(kBitsAllocated, "BitsAllocated"));
    const DicomElement* stored = file.find(kBitsStored);
    file.bits_stored = stored ? us_value(*stored) : file.bits_allocated;

    if (const auto* spp = file.find(kSamplesPerPixel); spp && us_value(*spp) != 1)
        throw UnsupportedFeatureError("only single-sample (grayscale) DICOM images are supported, got " +
                                      std::to_string(us_value(*spp)) + " samples per pixel");
    if (const auto* frames = file.find(kNumberOfFrames)) {
        const std::string n = trim_value(frames->value);
        if (!n.empty() && n != "1") throw UnsupportedFeatureError("multi-frame DICOM (" + n + " frames) is not supported");
    }
    if (const auto* rep = file.find(kPixelRepresentation); rep && us_value(*rep) != 0)
        throw UnsupportedFeatureError("signed DICOM pixel representation is not supported");
    if (file.bits_allocated != 8 && file.bits_allocated != 16)
        throw UnsupportedFeatureError("BitsAllocated " + std::to_string(file.bits_allocated) +
                                      " is not supported (expected 8 or 16)");
    if (file.bits_stored == 0 || file.bits_stored > file.bits_allocated)
        throw FormatError("BitsStored " + std::to_string(file.bits_stored) + " inconsistent with BitsAllocated");
    if (file.rows == 0 || file.columns == 0) throw FormatError("DICOM image has zero rows or columns");

    const DicomElement& px = required(kPixelData, "PixelData");
    const std::size_t expected = std::size_t{file.rows} * file.columns * (file.bits_allocated / 8);
    const std::size_t actual = px.value.size();
    // Odd-length values carry one trailing pad byte.
    if (actual < expected || actual > expected + (expected % 2))
        throw FormatError("pixel data length mismatch: expected " + std::to_string(expected) + " bytes for " +
                          std::to_string(file.rows) + "x" + std::to_string(file.columns) + "x" +
                          std::to_string(file.bits_allocated) + "-bit, got " + std::to_string(actual));
    file.pixel_data.assign(px.value.begin(), px.value.begin() + static_cast<std::ptrdiff_t>(expected));
    return file;
}

namespace {

class ElementWriter {
public:
    void element(DicomTag tag, std::string_view vr, std::span<const std::uint8_t> value) {
        u16(tag.group);
        u16(tag.element);
        out_.insert(out_.end(), vr.begin(), vr.end());
        const std::size_t padded = value.size() + (value.size() % 2);
        if (has_long_length(vr)) {
            u16(0);
            u32(static_cast<std::uint32_t>(padded));
        } else {
            u16(static_cast<std::uint16_t>(padded));
        }
        out_.insert(out_.end(), value.begin(), value.end());
        if (value.size() % 2) out_.push_back((vr == "UI" || vr == "OB" || vr == "OW") ? 0 : ' ');
    }
    void text(DicomTag tag, std::string_view vr, std::string_view s) {
        element(tag, vr, {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
    }
    void us(DicomTag tag, std::uint16_t v) {
        const std::uint8_t b[2] = {static_cast<std::uint8_t>(v), static_cast<std::uint8_t>(v >> 8)};
        element(tag, "US", b);
    }
    void u16(std::uint16_t v) {
        out_.push_back(static_cast<std::uint8_t>(v));
        out_.push_back(static_cast<std::uint8_t>(v >> 8));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    std::vector<std::uint8_t>& bytes() { return out_; }

private:
    std::vector<std::uint8_t> out_;
};

}  // namespace

std::vector<std::uint8_t> emit_dicom_lite(std::uint16_t rows, std::uint16_t columns, std::uint16_t bits,
                                          std::span<const std::uint16_t> pixels) {
    if (bits != 8 && bits != 16) throw ArgumentError("emit_dicom_lite: bits must be 8 or 16");
    if (rows == 0 || columns == 0) throw ArgumentError("emit_dicom_lite: image must be non-empty");
    if (pixels.size() != std::size_t{rows} * columns)
        throw DimensionError("emit_dicom_lite: " + std::to_string(pixels.size()) + " pixels for " +
                             std::to_string(rows) + "x" + std::to_string(columns) + " image");

    static constexpr std::string_view kSopClass = "1.2.840.10008.5.1.4.1.1.1.1";  // Digital X-Ray
    static constexpr std::string_view kInstance = "2.25.1";

    ElementWriter meta;
    const std::uint8_t version[2] = {0x00, 0x01};
    meta.element({0x0002, 0x0001}, "OB", version);
    meta.text({0x0002, 0x0002}, "UI", kSopClass);
    meta.text({0x0002, 0x0003}, "UI", kInstance);
    meta.text(kTransferSyntax, "UI", kExplicitVrLittleEndian);

    ElementWriter data;
    data.text({0x0008, 0x0016}, "UI", kSopClass);
    data.text({0x0008, 0x0018}, "UI", kInstance);
    data.text({0x0008, 0x0060}, "CS", "DX");
    data.us(kSamplesPerPixel, 1);
    data.text({0x0028, 0x0004}, "CS", "MONOCHROME2");
    data.us(kRows, rows);
    data.us(kColumns, columns);
    data.us(kBitsAllocated, bits);
    data.us(kBitsStored, bits);
    data.us({0x0028, 0x0102}, static_cast<std::uint16_t>(bits - 1));
    data.us(kPixelRepresentation, 0);

    std::vector<std::uint8_t> px;
    px.reserve(pixels.size() * (bits / 8));
    for (auto v : pixels) {
        if (bits == 8) {
            if (v > 255) throw ArgumentError("emit_dicom_lite: pixel value exceeds 8 bits");
            px.push_back(static_cast<std::uint8_t>(v));
        } else {
            px.push_back(static_cast<std::uint8_t>(v));
            px.push_back(static_cast<std::uint8_t>(v >> 8));
        }
    }
    data.element(kPixelData, bits == 8 ? "OB" : "OW", px);

    ElementWriter out;
    auto& bytes = out.bytes();
    bytes.assign(128, 0);
    bytes.insert(bytes.end(), {'D', 'I', 'C', 'M'});
    const std::uint8_t group_length[4] = {
        static_cast<std::uint8_t>(meta.bytes().size()), static_cast<std::uint8_t>(meta.bytes().size() >> 8),
        static_cast<std::uint8_t>(meta.bytes().size() >> 16), static_cast<std::uint8_t>(meta.bytes().size() >> 24)};
    out.element(kMetaGroupLength, "UL", group_length);
    bytes.insert(bytes.end(), meta.bytes().begin(), meta.bytes().end());
    bytes.insert(bytes.end(), data.bytes().begin(), data.bytes().end());
    return std::move(bytes);
}

RawImage dicom_to_image(const DicomLiteFile& file) {
    const auto px = file.pixels();
    Tensor t(Shape{1, file.rows, file.columns});
    for (std::size_t i = 0; i < px.size(); ++i) t[i] = px[i];
    return {std::move(t), static_cast<double>((1u << file.bits_stored) - 1)};
}

}  // namespace covilearn
