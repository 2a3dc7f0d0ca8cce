#include "covilearn/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <random>
#include <set>
#include <sstream>

#include "covilearn/errors.hpp"
#include "covilearn/image.hpp"
#include "covilearn/weights_io.hpp"

namespace covilearn {

Label parse_label(std::string_view text) {
    if (text == "covid") return Label::Covid;
    if (text == "normal") return Label::Normal;
    throw ArgumentError("unknown label '" + std::string(text) + "' (expected covid or normal)");
}

std::string_view to_string(Label label) { return label == Label::Covid ? "covid" : "normal"; }

Label label_from_index(std::size_t index) {
    if (index >= kNumClasses) throw ArgumentError("class index " + std::to_string(index) + " out of range");
    return static_cast<Label>(index);
}

Tensor one_hot(Label label) {
    Tensor t(Shape{kNumClasses});
    t[class_index(label)] = 1.0;
    return t;
}

std::string_view to_string(Split split) {
    switch (split) {
        case Split::Train: return "train";
        case Split::Test: return "test";
        case Split::Unassigned: return "";
    }
    return "";
}

namespace {

Split parse_split(std::string_view text) {
    if (text == "train") return Split::Train;
    if (text == "test") return Split::Test;
    if (text.empty()) return Split::Unassigned;
    throw FormatError("unknown split '" + std::string(text) + "' (expected train or test)");
}

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return std::string(s.substr(b, e - b + 1));
}

// Minimal RFC 4180 field splitting (quoted fields may contain commas).
std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> fields;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            fields.push_back(trim(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    fields.push_back(trim(cur));
    return fields;
}

std::string quote_csv(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    return out + "\"";
}

}  // namespace

DatasetManifest DatasetManifest::parse_csv(std::string_view text, std::filesystem::path base_dir) {
    DatasetManifest m(std::move(base_dir));
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    bool header_seen = false;
    bool has_split_column = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
        if (trim(line).empty()) continue;
        auto fields = split_csv_line(line);
        if (!header_seen) {
            header_seen = true;
            if (fields.size() < 2 || fields[0] != "path" || fields[1] != "label" || fields.size() > 3 ||
                (fields.size() == 3 && fields[2] != "split"))
                throw FormatError("manifest line 1: expected header 'path,label' (optionally ',split')");
            has_split_column = fields.size() == 3;
            continue;
        }
        if (fields.size() != (has_split_column ? 3u : 2u))
            throw FormatError("manifest line " + std::to_string(line_no) + ": expected " +
                              (has_split_column ? "3" : "2") + " fields, got " + std::to_string(fields.size()));
        if (fields[0].empty()) throw FormatError("manifest line " + std::to_string(line_no) + ": empty path");
        try {
            m.add(fields[0], parse_label(fields[1]), has_split_column ? parse_split(fields[2]) : Split::Unassigned);
        } catch (const ArgumentError& e) {
            throw FormatError("manifest line " + std::to_string(line_no) + ": " + e.what());
        } catch (const FormatError& e) {
            throw FormatError("manifest line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!header_seen) throw FormatError("manifest is empty: expected header 'path,label'");
    return m;
}

DatasetManifest DatasetManifest::read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open manifest '" + path.string() + "'");
    std::stringstream buf;
    buf << in.rdbuf();
    try {
        return parse_csv(buf.str(), path.parent_path());
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

void DatasetManifest::write_csv(const std::filesystem::path& path, bool with_split) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out << (with_split ? "path,label,split\n" : "path,label\n");
    for (const auto& r : records_) {
        out << quote_csv(r.path) << ',' << to_string(r.label);
        if (with_split) out << ',' << to_string(r.split);
        out << '\n';
    }
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void DatasetManifest::add(std::string path, Label label, Split split) {
    for (const auto& r : records_)
        if (r.path == path) throw ArgumentError("duplicate manifest path '" + path + "'");
    records_.push_back({std::move(path), label, split});
}

std::size_t DatasetManifest::count(Label label) const {
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [&](const auto& r) { return r.label == label; }));
}

std::size_t DatasetManifest::count(Split split) const {
    return static_cast<std::size_t>(
        std::count_if(records_.begin(), records_.end(), [&](const auto& r) { return r.split == split; }));
}

std::size_t DatasetManifest::count(Label label, Split split) const {
    return static_cast<std::size_t>(std::count_if(records_.begin(), records_.end(), [&](const auto& r) {
        return r.label == label && r.split == split;
    }));
}

bool DatasetManifest::has_splits() const {
    return !records_.empty() &&
           std::none_of(records_.begin(), records_.end(), [](const auto& r) { return r.split == Split::Unassigned; });
}

std::vector<std::size_t> DatasetManifest::indices(Split split) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < records_.size(); ++i)
        if (records_[i].split == split) out.push_back(i);
    return out;
}

std::filesystem::path DatasetManifest::resolve(const ManifestRecord& record) const {
    std::filesystem::path p(record.path);
    if (p.is_absolute() || base_dir_.empty()) return p;
    return base_dir_ / p;
}

DatasetManifest split_80_20(DatasetManifest manifest, std::uint64_t seed) {
    for (Label label : {Label::Covid, Label::Normal}) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < manifest.records().size(); ++i)
            if (manifest.records()[i].label == label) members.push_back(i);
        if (members.empty())
            throw ArgumentError("cannot split: class '" + std::string(to_string(label)) + "' has no records");
        std::mt19937_64 rng(seed + 0x9e3779b97f4a7c15ULL * (class_index(label) + 1));
        std::shuffle(members.begin(), members.end(), rng);
        // round(n / 5) in integer arithmetic; n / 5 is never exactly x.5
        const std::size_t test_count = (members.size() + 2) / 5;
        for (std::size_t k = 0; k < members.size(); ++k)
            manifest.records()[members[k]].split = k < test_count ? Split::Test : Split::Train;
    }
    return manifest;
}

Sample make_sample(Tensor pixels, Label label) { return Sample{std::move(pixels), one_hot(label), label}; }

Sample load_sample(const DatasetManifest& manifest, const ManifestRecord& record, const PreprocessOptions& options) {
    const auto path = manifest.resolve(record);
    if (!std::filesystem::exists(path)) throw IoError("image file not found: '" + path.string() + "'");
    const Bytes bytes = read_file_bytes(path);
    try {
        return make_sample(preprocess(decode_image(bytes), options), record.label);
    } catch (const Error& e) {
        throw FormatError("'" + path.string() + "': " + e.what());
    }
}

std::vector<Sample> load_split(const DatasetManifest& manifest, Split split, const PreprocessOptions& options) {
    std::vector<Sample> out;
    for (const auto& r : manifest.records())
        if (r.split == split) out.push_back(load_sample(manifest, r, options));
    return out;
}

Tensor stack_pixels(std::span<const Sample> samples, std::span<const std::size_t> order) {
    const std::size_t n = order.empty() ? samples.size() : order.size();
    if (n == 0) throw ArgumentError("stack_pixels: empty batch");
    const Shape& s = samples[order.empty() ? 0 : order[0]].pixels.shape();
    Shape shape{n};
    shape.insert(shape.end(), s.begin(), s.end());
    Tensor batch(shape);
    const std::size_t block = shape_numel(s);
    for (std::size_t i = 0; i < n; ++i) {
        const Tensor& px = samples[order.empty() ? i : order[i]].pixels;
        if (px.shape() != s) throw DimensionError("stack_pixels: samples have differing shapes");
        std::copy(px.data().begin(), px.data().end(), batch.data().begin() + static_cast<std::ptrdiff_t>(i * block));
    }
    return batch;
}

SplitData load_splits(DatasetManifest manifest, std::size_t input_size, std::uint64_t seed, bool subtract_mean) {
    SplitData out;
    out.manifest = manifest.has_splits() ? std::move(manifest) : split_80_20(std::move(manifest), seed);
    PreprocessOptions options;
    options.target_size = input_size;
    out.train = load_split(out.manifest, Split::Train, options);
    out.test = load_split(out.manifest, Split::Test, options);
    if (subtract_mean) {
        if (out.train.empty()) throw ArgumentError("mean subtraction needs a non-empty train split");
        std::vector<Tensor> pixels;
        pixels.reserve(out.train.size());
        for (const auto& s : out.train) pixels.push_back(s.pixels);
        out.channel_mean = channel_means(pixels);
        for (auto& s : out.train) s.pixels = subtract_channel_mean(std::move(s.pixels), *out.channel_mean);
        for (auto& s : out.test) s.pixels = subtract_channel_mean(std::move(s.pixels), *out.channel_mean);
    }
    return out;
}

}  // namespace covilearn
