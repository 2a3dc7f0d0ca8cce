#pragma once

// Declarative layer graphs for the four transfer-learning variants and the
// micro test variant. A graph carries shapes and parameter shapes only; the
// values live in a ParameterStore.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "covilearn/ops.hpp"
#include "covilearn/tensor.hpp"

namespace covilearn {

enum class LayerKind {
    Input,
    ZeroPad,
    Conv,
    BatchNorm,
    Relu,
    MaxPool,
    AvgPool,
    GlobalAvgPool,
    Concat,
    Add,
    Flatten,
    Dense,
    Dropout,
    Softmax,
};

std::string_view to_string(LayerKind kind);

enum class ParamRole { Kernel, Bias, Gamma, Beta, MovingMean, MovingVariance };

enum class InitScheme { HeUniform, GlorotUniform };

struct ParamSpec {
    std::string name;  // "<layer>/<role>"
    Shape shape;
    ParamRole role;

    std::size_t count() const { return shape_numel(shape); }
};

struct LayerAttributes {
    std::size_t filters = 0;  // conv output channels
    std::size_t kernel = 0;   // square conv kernel extent
    int stride = 1;           // conv and pool stride
    ops::Padding padding = ops::Padding::Valid;
    bool use_bias = false;
    ops::PadAmounts pad;  // ZeroPad
    int window = 0;       // pooling window
    std::size_t units = 0;
    double rate = 0.0;  // dropout
    double eps = 1.001e-5;
    InitScheme init = InitScheme::HeUniform;
};

struct LayerSpec {
    std::string name;
    LayerKind kind = LayerKind::Input;
    std::vector<std::string> inputs;
    LayerAttributes attrs;
    std::vector<ParamSpec> params;
    Shape output_shape;  // per sample, batch axis excluded
    bool frozen = false;

    std::size_t parameter_count() const;
};

class ArchitectureGraph {
public:
    ArchitectureGraph(std::string tag, Shape input_shape);

    const std::string& tag() const noexcept { return tag_; }
    const Shape& input_shape() const noexcept { return input_shape_; }
    const std::vector<LayerSpec>& layers() const noexcept { return layers_; }
    const LayerSpec& layer(std::string_view name) const;
    std::size_t index_of(std::string_view name) const;
    bool contains(std::string_view name) const;
    const LayerSpec& output() const { return layers_.back(); }

    // Output shape with the batch axis prepended.
    Shape output_shape(std::size_t batch) const;

    // Last layer of the frozen feature extractor, when the graph has one.
    const std::optional<std::string>& backbone_output() const noexcept { return backbone_output_; }
    void mark_backbone_output(std::string name);

    std::vector<ParamSpec> parameters() const;
    std::size_t total_parameters() const;
    std::size_t trainable_parameters() const;
    std::size_t frozen_parameters() const { return total_parameters() - trainable_parameters(); }

    void set_frozen(std::string_view layer, bool frozen);
    void freeze_all();

    // Builders. Each validates its inputs, infers the output shape and
    // returns the new layer's name.
    std::string zero_pad(std::string name, const std::string& in, std::size_t amount);
    std::string conv(std::string name, const std::string& in, std::size_t filters, std::size_t kernel, int stride,
                     ops::Padding padding, bool use_bias);
    std::string batchnorm(std::string name, const std::string& in, double eps = 1.001e-5);
    std::string relu(std::string name, const std::string& in);
    std::string max_pool(std::string name, const std::string& in, int window, int stride);
    std::string avg_pool(std::string name, const std::string& in, int window, int stride);
    std::string global_avg_pool(std::string name, const std::string& in);
    std::string concat(std::string name, const std::vector<std::string>& ins);
    std::string add(std::string name, const std::string& a, const std::string& b);
    std::string flatten(std::string name, const std::string& in);
    std::string dense(std::string name, const std::string& in, std::size_t units, InitScheme init);
    std::string dropout(std::string name, const std::string& in, double rate);
    std::string softmax(std::string name, const std::string& in);

private:
    std::string push(LayerSpec spec);
    const Shape& shape_of(const std::string& name) const;

    std::string tag_;
    Shape input_shape_;
    std::vector<LayerSpec> layers_;
    std::optional<std::string> backbone_output_;
};

enum class Backbone { ResNet50, ResNet101, DenseNet121, DenseNet169, Micro };
enum class HeadKind { GapDense, Alg1Conv };

Backbone parse_backbone(std::string_view name);
HeadKind parse_head_kind(std::string_view name);
std::string_view to_string(Backbone backbone);
std::string_view to_string(HeadKind head);

// A backbone plus head, written "densenet121-gapdense", "micro-alg1conv", ...
// A bare backbone name selects the gap-dense head; "dnn-i" .. "dnn-iv" alias
// the four table variants.
struct ModelVariant {
    Backbone backbone = Backbone::DenseNet121;
    HeadKind head = HeadKind::GapDense;

    static ModelVariant parse(std::string_view text);
    std::string name() const;
    std::string tag() const;  // "DNN-I" .. "DNN-IV" or "micro"

    friend bool operator==(const ModelVariant&, const ModelVariant&) = default;
};

inline constexpr double kHeadDropoutRate = 0.5;
inline constexpr std::size_t kHeadHiddenUnits = 64;
inline constexpr std::size_t kHeadConvFilters = 64;

// Feature extractor without classification top. Layers are not frozen here.
ArchitectureGraph build_backbone(Backbone backbone);
ArchitectureGraph build_backbone(std::string_view name);

// Standalone head over a (channels, spatial, spatial) feature map.
ArchitectureGraph build_head(std::size_t channels, HeadKind kind, std::size_t spatial = 7);

// Appends the head to `graph` after layer `from`; returns the softmax layer.
std::string append_head(ArchitectureGraph& graph, const std::string& from, HeadKind kind);

// Frozen backbone followed by a trainable head.
ArchitectureGraph assemble_model(const ModelVariant& variant);

// 7103234 -> "7,103,234"
std::string group_thousands(std::size_t value);

// Human-readable per-layer parameter table, ending with the totals.
std::string format_parameter_table(const ArchitectureGraph& graph);

}  // namespace covilearn
