#pragma once

// Weights container ("CVLW"), little-endian throughout:
//
//   magic      4 bytes  "CVLW"
//   version    u16      currently 1
//   count      u32      number of records
//   record     name_len u16, name (UTF-8), rank u8, extents u32 x rank,
//              float32 x product(extents)
//
// Values are narrowed to float32 on write and widened to double on read.

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "covilearn/architecture.hpp"
#include "covilearn/parameters.hpp"

namespace covilearn {

inline constexpr std::uint16_t kWeightsFormatVersion = 1;

using Bytes = std::vector<std::uint8_t>;

// Records are written in graph order. Throws FormatError naming the first
// graph parameter the store lacks.
Bytes serialize_weights(const ParameterStore& store, const ArchitectureGraph& graph);

enum class WeightsMatch {
    Exact,   // every graph parameter present, nothing extra
    Subset,  // records may cover only part of the graph (backbone import)
};

// Names the offending layer and parameter on any mismatch.
ParameterStore deserialize_weights(std::span<const std::uint8_t> bytes, const ArchitectureGraph& graph,
                                   WeightsMatch match = WeightsMatch::Exact);

void write_weights_file(const std::filesystem::path& path, const ParameterStore& store,
                        const ArchitectureGraph& graph);
ParameterStore read_weights_file(const std::filesystem::path& path, const ArchitectureGraph& graph,
                                 WeightsMatch match = WeightsMatch::Exact);

Bytes read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace covilearn
