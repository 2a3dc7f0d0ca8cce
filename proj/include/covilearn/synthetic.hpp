#pragma once

// Separable stand-in data for exercising the full pipeline without the
// original radiographs: positives are linear intensity ramps, negatives are
// flat fields, both with mild noise.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "covilearn/dataset.hpp"

namespace covilearn {

// Half of `count` (rounded up) are covid ramps, the rest normal flats,
// interleaved. Each image is (3,size,size) in [0,1].
std::vector<Sample> make_separable_samples(std::size_t count, std::size_t size, std::uint64_t seed);

// Same content written as 8-bit grayscale PNGs plus manifest.csv under `dir`.
// Returns the manifest (paths relative to `dir`, splits unassigned).
DatasetManifest write_synthetic_dataset(const std::filesystem::path& dir, std::size_t count, std::size_t size,
                                        std::uint64_t seed);

}  // namespace covilearn
