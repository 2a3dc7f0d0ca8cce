#include "covilearn/weights_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <map>

#include "covilearn/errors.hpp"

namespace covilearn {

namespace {

constexpr std::uint8_t kMagic[4] = {'C', 'V', 'L', 'W'};

class Writer {
public:
    void u8(std::uint8_t v) { out_.push_back(v); }
    void u16(std::uint16_t v) {
        for (int i = 0; i < 2; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void u32(std::uint32_t v) {
        for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
    }
    void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
    void raw(std::span<const std::uint8_t> b) { out_.insert(out_.end(), b.begin(), b.end()); }
    Bytes take() { return std::move(out_); }

private:
    Bytes out_;
};

class Reader {
public:
    explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

    std::uint8_t u8(const char* what) { return need(1, what)[0]; }
    std::uint16_t u16(const char* what) {
        auto b = need(2, what);
        return static_cast<std::uint16_t>(b[0] | (b[1] << 8));
    }
    std::uint32_t u32(const char* what) {
        auto b = need(4, what);
        return static_cast<std::uint32_t>(b[0]) | (static_cast<std::uint32_t>(b[1]) << 8) |
               (static_cast<std::uint32_t>(b[2]) << 16) | (static_cast<std::uint32_t>(b[3]) << 24);
    }
    std::span<const std::uint8_t> need(std::size_t n, const std::string& what) {
        if (in_.size() - pos_ < n)
            throw FormatError("weights container truncated while reading " + what + " at byte " +
                              std::to_string(pos_));
        auto s = in_.subspan(pos_, n);
        pos_ += n;
        return s;
    }
    bool at_end() const { return pos_ == in_.size(); }
    std::size_t position() const { return pos_; }

private:
    std::span<const std::uint8_t> in_;
    std::size_t pos_ = 0;
};

// Parameter name -> owning layer name.
std::map<std::string, std::pair<std::string, Shape>, std::less<>> graph_index(const ArchitectureGraph& graph) {
    std::map<std::string, std::pair<std::string, Shape>, std::less<>> idx;
    for (const auto& l : graph.layers())
        for (const auto& p : l.params) idx.emplace(p.name, std::make_pair(l.name, p.shape));
    return idx;
}

}  // namespace

Bytes serialize_weights(const ParameterStore& store, const ArchitectureGraph& graph) {
    require_matches(store, graph);
    const auto params = graph.parameters();
    Writer w;
    w.raw(kMagic);
    w.u16(kWeightsFormatVersion);
    w.u32(static_cast<std::uint32_t>(params.size()));
    for (const auto& p : params) {
        if (p.name.size() > 0xFFFF) throw FormatError("parameter name too long: " + p.name);
        w.u16(static_cast<std::uint16_t>(p.name.size()));
        w.raw({reinterpret_cast<const std::uint8_t*>(p.name.data()), p.name.size()});
        w.u8(static_cast<std::uint8_t>(p.shape.size()));
        for (auto e : p.shape) w.u32(static_cast<std::uint32_t>(e));
        for (double v : store.at(p.name).data()) w.f32(static_cast<float>(v));
    }
    return w.take();
}

ParameterStore deserialize_weights(std::span<const std::uint8_t> bytes, const ArchitectureGraph& graph,
                                   WeightsMatch match) {
    Reader r(bytes);
    auto magic = r.need(4, "magic");
    if (std::memcmp(magic.data(), kMagic, 4) != 0) throw FormatError("not a weights container: bad magic bytes");
    const auto version = r.u16("format version");
    if (version != kWeightsFormatVersion)
        throw FormatError("unsupported weights format version " + std::to_string(version));
    const auto count = r.u32("record count");

    const auto index = graph_index(graph);
    ParameterStore store;
    for (std::uint32_t rec = 0; rec < count; ++rec) {
        const std::string ctx = "record " + std::to_string(rec);
        const auto len = r.u16((ctx + " name length").c_str());
        auto name_bytes = r.need(len, ctx + " name");
        std::string name(reinterpret_cast<const char*>(name_bytes.data()), name_bytes.size());

        auto it = index.find(name);
        if (it == index.end())
            throw FormatError("parameter '" + name + "' in weights file does not exist in graph " + graph.tag());
        const auto& [layer, expected] = it->second;
        const std::string who = "layer '" + layer + "' parameter '" + name + "'";
        if (store.contains(name)) throw FormatError(who + " appears twice in weights file");

        const auto rank = r.u8((ctx + " rank").c_str());
        Shape shape;
        for (std::uint8_t i = 0; i < rank; ++i) {
            const auto e = r.u32((ctx + " extent").c_str());
            if (e == 0) throw FormatError(who + " has a zero extent");
            shape.push_back(e);
        }
        if (shape != expected)
            throw FormatError(who + " has shape " + shape_to_string(shape) + " in weights file, graph expects " +
                              shape_to_string(expected));
        const std::size_t n = shape_numel(shape);
        auto payload = r.need(n * 4, who + " data");
        std::vector<double> values(n);
        for (std::size_t i = 0; i < n; ++i) {
            const std::uint32_t bits = static_cast<std::uint32_t>(payload[4 * i]) |
                                       (static_cast<std::uint32_t>(payload[4 * i + 1]) << 8) |
                                       (static_cast<std::uint32_t>(payload[4 * i + 2]) << 16) |
                                       (static_cast<std::uint32_t>(payload[4 * i + 3]) << 24);
            values[i] = static_cast<double>(std::bit_cast<float>(bits));
        }
        store.set(std::move(name), Tensor(std::move(shape), std::move(values)));
    }
    if (!r.at_end())
        throw FormatError("weights container has trailing bytes after " + std::to_string(count) + " records");
    if (match == WeightsMatch::Exact) require_matches(store, graph);
    return store;
}

Bytes read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    return bytes;
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

void write_weights_file(const std::filesystem::path& path, const ParameterStore& store,
                        const ArchitectureGraph& graph) {
    write_file_bytes(path, serialize_weights(store, graph));
}

ParameterStore read_weights_file(const std::filesystem::path& path, const ArchitectureGraph& graph,
                                 WeightsMatch match) {
    try {
        return deserialize_weights(read_file_bytes(path), graph, match);
    } catch (const FormatError& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace covilearn
