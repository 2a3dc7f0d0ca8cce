#pragma once

// Labels, manifests, the stratified 80:20 split and sample loading.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "covilearn/preprocess.hpp"
#include "covilearn/tensor.hpp"

namespace covilearn {

// Class index 0 is the positive class everywhere.
enum class Label : std::uint8_t { Covid = 0, Normal = 1 };

inline constexpr std::size_t kNumClasses = 2;

Label parse_label(std::string_view text);
std::string_view to_string(Label label);
inline std::size_t class_index(Label label) { return static_cast<std::size_t>(label); }
Label label_from_index(std::size_t index);

// covid -> [1,0], normal -> [0,1]
Tensor one_hot(Label label);

enum class Split { Unassigned, Train, Test };
std::string_view to_string(Split split);

struct ManifestRecord {
    std::string path;
    Label label = Label::Normal;
    Split split = Split::Unassigned;
};

// CSV with header "path,label" and an optional third "split" column.
// Relative paths resolve against the manifest's directory.
class DatasetManifest {
public:
    DatasetManifest() = default;
    explicit DatasetManifest(std::filesystem::path base_dir) : base_dir_(std::move(base_dir)) {}

    static DatasetManifest read_csv(const std::filesystem::path& path);
    static DatasetManifest parse_csv(std::string_view text, std::filesystem::path base_dir = {});
    void write_csv(const std::filesystem::path& path, bool with_split = true) const;

    // Throws ArgumentError on a duplicate path.
    void add(std::string path, Label label, Split split = Split::Unassigned);

    const std::vector<ManifestRecord>& records() const noexcept { return records_; }
    std::vector<ManifestRecord>& records() noexcept { return records_; }
    std::size_t size() const noexcept { return records_.size(); }
    std::size_t count(Label label) const;
    std::size_t count(Split split) const;
    std::size_t count(Label label, Split split) const;
    bool has_splits() const;
    std::vector<std::size_t> indices(Split split) const;

    const std::filesystem::path& base_dir() const noexcept { return base_dir_; }
    std::filesystem::path resolve(const ManifestRecord& record) const;

private:
    std::filesystem::path base_dir_;
    std::vector<ManifestRecord> records_;
};

inline constexpr double kTestFraction = 0.2;

// Stratified per class: round(0.2 * class size) records go to test, chosen by
// a seeded shuffle. Throws ArgumentError when either class is empty.
DatasetManifest split_80_20(DatasetManifest manifest, std::uint64_t seed);

struct Sample {
    Tensor pixels;  // (3,S,S)
    Tensor target;  // one-hot (2)
    Label label = Label::Normal;
};

Sample make_sample(Tensor pixels, Label label);

// Reads, decodes and preprocesses one record. Missing or unreadable files
// raise IoError naming the resolved path.
Sample load_sample(const DatasetManifest& manifest, const ManifestRecord& record, const PreprocessOptions& options);
std::vector<Sample> load_split(const DatasetManifest& manifest, Split split, const PreprocessOptions& options);

struct SplitData {
    DatasetManifest manifest;  // with splits assigned
    std::vector<Sample> train;
    std::vector<Sample> test;
    std::optional<ChannelMean> channel_mean;  // set when mean subtraction is on
};

// Uses the manifest's split column when present, otherwise split_80_20(seed).
// With `subtract_mean` the per-channel mean of the train split is removed
// from both splits.
SplitData load_splits(DatasetManifest manifest, std::size_t input_size, std::uint64_t seed, bool subtract_mean);

// Stacks sample pixels into an (N,3,S,S) batch.
Tensor stack_pixels(std::span<const Sample> samples, std::span<const std::size_t> order = {});

}  // namespace covilearn
