#include "covilearn/architecture.hpp"

#include <algorithm>
#include <cctype>
#include <iomanip>
#include <sstream>

#include "covilearn/errors.hpp"

namespace covilearn {

std::string_view to_string(LayerKind kind) {
    switch (kind) {
        case LayerKind::Input: return "Input";
        case LayerKind::ZeroPad: return "ZeroPad";
        case LayerKind::Conv: return "Conv";
        case LayerKind::BatchNorm: return "BatchNorm";
        case LayerKind::Relu: return "Relu";
        case LayerKind::MaxPool: return "MaxPool";
        case LayerKind::AvgPool: return "AvgPool";
        case LayerKind::GlobalAvgPool: return "GlobalAvgPool";
        case LayerKind::Concat: return "Concat";
        case LayerKind::Add: return "Add";
        case LayerKind::Flatten: return "Flatten";
        case LayerKind::Dense: return "Dense";
        case LayerKind::Dropout: return "Dropout";
        case LayerKind::Softmax: return "Softmax";
    }
    return "?";
}

std::size_t LayerSpec::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.count();
    return n;
}

ArchitectureGraph::ArchitectureGraph(std::string tag, Shape input_shape)
    : tag_(std::move(tag)), input_shape_(std::move(input_shape)) {
    if (input_shape_.empty() || shape_numel(input_shape_) == 0)
        throw DimensionError("graph input shape must be non-empty with positive extents");
    LayerSpec in;
    in.name = "input";
    in.kind = LayerKind::Input;
    in.output_shape = input_shape_;
    layers_.push_back(std::move(in));
}

std::size_t ArchitectureGraph::index_of(std::string_view name) const {
    for (std::size_t i = 0; i < layers_.size(); ++i)
        if (layers_[i].name == name) return i;
    throw ArgumentError("graph " + tag_ + " has no layer '" + std::string(name) + "'");
}

const LayerSpec& ArchitectureGraph::layer(std::string_view name) const { return layers_[index_of(name)]; }

bool ArchitectureGraph::contains(std::string_view name) const {
    return std::any_of(layers_.begin(), layers_.end(), [&](const LayerSpec& l) { return l.name == name; });
}

Shape ArchitectureGraph::output_shape(std::size_t batch) const {
    Shape s{batch};
    const Shape& o = layers_.back().output_shape;
    s.insert(s.end(), o.begin(), o.end());
    return s;
}

void ArchitectureGraph::mark_backbone_output(std::string name) {
    index_of(name);
    backbone_output_ = std::move(name);
}

std::vector<ParamSpec> ArchitectureGraph::parameters() const {
    std::vector<ParamSpec> out;
    for (const auto& l : layers_) out.insert(out.end(), l.params.begin(), l.params.end());
    return out;
}

std::size_t ArchitectureGraph::total_parameters() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.parameter_count();
    return n;
}

std::size_t ArchitectureGraph::trainable_parameters() const {
    std::size_t n = 0;
    for (const auto& l : layers_)
        if (!l.frozen) n += l.parameter_count();
    return n;
}

void ArchitectureGraph::set_frozen(std::string_view layer, bool frozen) { layers_[index_of(layer)].frozen = frozen; }

void ArchitectureGraph::freeze_all() {
    for (auto& l : layers_) l.frozen = true;
}

const Shape& ArchitectureGraph::shape_of(const std::string& name) const { return layer(name).output_shape; }

std::string ArchitectureGraph::push(LayerSpec spec) {
    if (spec.name.empty()) throw ArgumentError("layer name must not be empty");
    if (contains(spec.name)) throw ArgumentError("duplicate layer name '" + spec.name + "' in graph " + tag_);
    std::string name = spec.name;
    layers_.push_back(std::move(spec));
    return name;
}

namespace {

LayerSpec make(std::string name, LayerKind kind, std::vector<std::string> inputs) {
    LayerSpec s;
    s.name = std::move(name);
    s.kind = kind;
    s.inputs = std::move(inputs);
    return s;
}

void require_spatial(const Shape& s, const std::string& layer) {
    if (s.size() != 3) throw DimensionError("layer '" + layer + "' needs a (C,H,W) input, got " + shape_to_string(s));
}

}  // namespace

std::string ArchitectureGraph::zero_pad(std::string name, const std::string& in, std::size_t amount) {
    const Shape& s = shape_of(in);
    require_spatial(s, name);
    LayerSpec spec = make(std::move(name), LayerKind::ZeroPad, {in});
    spec.attrs.pad = {amount, amount, amount, amount};
    spec.output_shape = {s[0], s[1] + 2 * amount, s[2] + 2 * amount};
    return push(std::move(spec));
}

std::string ArchitectureGraph::conv(std::string name, const std::string& in, std::size_t filters, std::size_t kernel,
                                    int stride, ops::Padding padding, bool use_bias) {
    const Shape& s = shape_of(in);
    require_spatial(s, name);
    if (filters == 0 || kernel == 0) throw ArgumentError("conv '" + name + "': filters and kernel must be positive");
    LayerSpec spec = make(name, LayerKind::Conv, {in});
    spec.attrs.filters = filters;
    spec.attrs.kernel = kernel;
    spec.attrs.stride = stride;
    spec.attrs.padding = padding;
    spec.attrs.use_bias = use_bias;
    const auto [oh, ow] = ops::conv_output_extent(s[1], s[2], kernel, kernel, {stride, padding});
    spec.output_shape = {filters, oh, ow};
    spec.params.push_back({name + "/kernel", {filters, s[0], kernel, kernel}, ParamRole::Kernel});
    if (use_bias) spec.params.push_back({name + "/bias", {filters}, ParamRole::Bias});
    return push(std::move(spec));
}

std::string ArchitectureGraph::batchnorm(std::string name, const std::string& in, double eps) {
    const Shape& s = shape_of(in);
    require_spatial(s, name);
    LayerSpec spec = make(name, LayerKind::BatchNorm, {in});
    spec.attrs.eps = eps;
    spec.output_shape = s;
    const std::size_t c = s[0];
    spec.params = {{name + "/gamma", {c}, ParamRole::Gamma},
                   {name + "/beta", {c}, ParamRole::Beta},
                   {name + "/moving_mean", {c}, ParamRole::MovingMean},
                   {name + "/moving_variance", {c}, ParamRole::MovingVariance}};
    return push(std::move(spec));
}

std::string ArchitectureGraph::relu(std::string name, const std::string& in) {
    LayerSpec spec = make(std::move(name), LayerKind::Relu, {in});
    spec.output_shape = shape_of(in);
    return push(std::move(spec));
}

std::string ArchitectureGraph::max_pool(std::string name, const std::string& in, int window, int stride) {
    const Shape& s = shape_of(in);
    require_spatial(s, name);
    if (window <= 0 || stride <= 0) throw ArgumentError("max_pool '" + name + "': window and stride must be positive");
    const auto k = static_cast<std::size_t>(window), st = static_cast<std::size_t>(stride);
    if (k > s[1] || k > s[2]) throw ArgumentError("max_pool '" + name + "': window larger than input");
    LayerSpec spec = make(std::move(name), LayerKind::MaxPool, {in});
    spec.attrs.window = window;
    spec.attrs.stride = stride;
    spec.output_shape = {s[0], (s[1] - k) / st + 1, (s[2] - k) / st + 1};
    return push(std::move(spec));
}

std::string ArchitectureGraph::avg_pool(std::string name, const std::string& in, int window, int stride) {
    const Shape& s = shape_of(in);
    require_spatial(s, name);
    if (window <= 0 || stride <= 0) throw ArgumentError("avg_pool '" + name + "': window and stride must be positive");
    const auto k = static_cast<std::size_t>(window), st = static_cast<std::size_t>(stride);
    if (k > s[1] || k > s[2]) throw ArgumentError("avg_pool '" + name + "': window larger than input");
    LayerSpec spec = make(std::move(name), LayerKind::AvgPool, {in});
    spec.attrs.window = window;
    spec.attrs.stride = stride;
    spec.output_shape = {s[0], (s[1] - k) / st + 1, (s[2] - k) / st + 1};
    return push(std::move(spec));
}

std::string ArchitectureGraph::global_avg_pool(std::string name, const std::string& in) {
    const Shape& s = shape_of(in);
    require_spatial(s, name);
    LayerSpec spec = make(std::move(name), LayerKind::GlobalAvgPool, {in});
    spec.output_shape = {s[0]};
    return push(std::move(spec));
}

std::string ArchitectureGraph::concat(std::string name, const std::vector<std::string>& ins) {
    if (ins.empty()) throw ArgumentError("concat '" + name + "': no inputs");
    const Shape& first = shape_of(ins.front());
    require_spatial(first, name);
    std::size_t channels = 0;
    for (const auto& in : ins) {
        const Shape& s = shape_of(in);
        require_spatial(s, name);
        if (s[1] != first[1] || s[2] != first[2])
            throw DimensionError("concat '" + name + "': spatial mismatch between " + shape_to_string(first) +
                                 " and " + shape_to_string(s));
        channels += s[0];
    }
    LayerSpec spec = make(std::move(name), LayerKind::Concat, ins);
    spec.output_shape = {channels, first[1], first[2]};
    return push(std::move(spec));
}

std::string ArchitectureGraph::add(std::string name, const std::string& a, const std::string& b) {
    if (shape_of(a) != shape_of(b))
        throw DimensionError("add '" + name + "': shapes " + shape_to_string(shape_of(a)) + " and " +
                             shape_to_string(shape_of(b)) + " differ");
    LayerSpec spec = make(std::move(name), LayerKind::Add, {a, b});
    spec.output_shape = shape_of(a);
    return push(std::move(spec));
}

std::string ArchitectureGraph::flatten(std::string name, const std::string& in) {
    LayerSpec spec = make(std::move(name), LayerKind::Flatten, {in});
    spec.output_shape = {shape_numel(shape_of(in))};
    return push(std::move(spec));
}

std::string ArchitectureGraph::dense(std::string name, const std::string& in, std::size_t units, InitScheme init) {
    const Shape& s = shape_of(in);
    if (s.size() != 1) throw DimensionError("dense '" + name + "' needs a flat input, got " + shape_to_string(s));
    if (units == 0) throw ArgumentError("dense '" + name + "': units must be positive");
    LayerSpec spec = make(name, LayerKind::Dense, {in});
    spec.attrs.units = units;
    spec.attrs.init = init;
    spec.output_shape = {units};
    spec.params = {{name + "/kernel", {s[0], units}, ParamRole::Kernel}, {name + "/bias", {units}, ParamRole::Bias}};
    return push(std::move(spec));
}

std::string ArchitectureGraph::dropout(std::string name, const std::string& in, double rate) {
    if (!(rate >= 0.0 && rate < 1.0)) throw ArgumentError("dropout '" + name + "': rate must lie in [0,1)");
    LayerSpec spec = make(std::move(name), LayerKind::Dropout, {in});
    spec.attrs.rate = rate;
    spec.output_shape = shape_of(in);
    return push(std::move(spec));
}

std::string ArchitectureGraph::softmax(std::string name, const std::string& in) {
    const Shape& s = shape_of(in);
    if (s.size() != 1) throw DimensionError("softmax '" + name + "' needs a flat input");
    LayerSpec spec = make(std::move(name), LayerKind::Softmax, {in});
    spec.output_shape = s;
    return push(std::move(spec));
}

// ---------------------------------------------------------------------------
// Variants

namespace {

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

constexpr double kBnEps = 1.001e-5;
constexpr std::size_t kGrowthRate = 32;
constexpr std::size_t kMicroGrowthRate = 8;

// BN -> ReLU -> 1x1 conv (4k) -> BN -> ReLU -> 3x3 conv (k) -> concat.
std::string dense_layer(ArchitectureGraph& g, const std::string& in, const std::string& name, std::size_t growth) {
    auto x = g.batchnorm(name + "_0_bn", in, kBnEps);
    x = g.relu(name + "_0_relu", x);
    x = g.conv(name + "_1_conv", x, 4 * growth, 1, 1, ops::Padding::Valid, false);
    x = g.batchnorm(name + "_1_bn", x, kBnEps);
    x = g.relu(name + "_1_relu", x);
    x = g.conv(name + "_2_conv", x, growth, 3, 1, ops::Padding::Same, false);
    return g.concat(name + "_concat", {in, x});
}

std::string transition(ArchitectureGraph& g, const std::string& in, const std::string& name) {
    const std::size_t channels = g.layer(in).output_shape[0];
    auto x = g.batchnorm(name + "_bn", in, kBnEps);
    x = g.relu(name + "_relu", x);
    x = g.conv(name + "_conv", x, channels / 2, 1, 1, ops::Padding::Valid, false);
    return g.avg_pool(name + "_pool", x, 2, 2);
}

std::string dense_blocks(ArchitectureGraph& g, std::string x, const std::vector<int>& blocks, std::size_t growth) {
    for (std::size_t b = 0; b < blocks.size(); ++b) {
        const std::string stage = "conv" + std::to_string(b + 2);
        for (int i = 1; i <= blocks[b]; ++i) x = dense_layer(g, x, stage + "_block" + std::to_string(i), growth);
        if (b + 1 < blocks.size()) x = transition(g, x, "pool" + std::to_string(b + 2));
    }
    x = g.batchnorm("bn", x, kBnEps);
    return g.relu("relu", x);
}

ArchitectureGraph densenet(std::string tag, const std::vector<int>& blocks) {
    ArchitectureGraph g(std::move(tag), {3, 224, 224});
    auto x = g.zero_pad("zero_padding2d", "input", 3);
    x = g.conv("conv1_conv", x, 64, 7, 2, ops::Padding::Valid, false);
    x = g.batchnorm("conv1_bn", x, kBnEps);
    x = g.relu("conv1_relu", x);
    x = g.zero_pad("zero_padding2d_1", x, 1);
    x = g.max_pool("pool1", x, 3, 2);
    x = dense_blocks(g, x, blocks, kGrowthRate);
    g.mark_backbone_output(x);
    return g;
}

ArchitectureGraph micro_densenet() {
    ArchitectureGraph g("micro", {3, 32, 32});
    auto x = g.conv("conv1_conv", "input", 16, 3, 1, ops::Padding::Same, false);
    x = g.batchnorm("conv1_bn", x, kBnEps);
    x = g.relu("conv1_relu", x);
    x = g.max_pool("pool1", x, 2, 2);
    x = dense_blocks(g, x, {2, 2}, kMicroGrowthRate);
    g.mark_backbone_output(x);
    return g;
}

// Bottleneck residual unit: 1x1 -> 3x3 -> 1x1 (4f) plus shortcut.
std::string bottleneck(ArchitectureGraph& g, const std::string& in, const std::string& name, std::size_t filters,
                       int stride, bool conv_shortcut) {
    std::string shortcut = in;
    if (conv_shortcut) {
        shortcut = g.conv(name + "_0_conv", in, 4 * filters, 1, stride, ops::Padding::Valid, true);
        shortcut = g.batchnorm(name + "_0_bn", shortcut, kBnEps);
    }
    auto x = g.conv(name + "_1_conv", in, filters, 1, stride, ops::Padding::Valid, true);
    x = g.batchnorm(name + "_1_bn", x, kBnEps);
    x = g.relu(name + "_1_relu", x);
    x = g.conv(name + "_2_conv", x, filters, 3, 1, ops::Padding::Same, true);
    x = g.batchnorm(name + "_2_bn", x, kBnEps);
    x = g.relu(name + "_2_relu", x);
    x = g.conv(name + "_3_conv", x, 4 * filters, 1, 1, ops::Padding::Valid, true);
    x = g.batchnorm(name + "_3_bn", x, kBnEps);
    x = g.add(name + "_add", shortcut, x);
    return g.relu(name + "_out", x);
}

ArchitectureGraph resnet(std::string tag, const std::vector<int>& stages) {
    ArchitectureGraph g(std::move(tag), {3, 224, 224});
    auto x = g.zero_pad("conv1_pad", "input", 3);
    x = g.conv("conv1_conv", x, 64, 7, 2, ops::Padding::Valid, true);
    x = g.batchnorm("conv1_bn", x, kBnEps);
    x = g.relu("conv1_relu", x);
    x = g.zero_pad("pool1_pad", x, 1);
    x = g.max_pool("pool1_pool", x, 3, 2);
    for (std::size_t s = 0; s < stages.size(); ++s) {
        const std::size_t filters = std::size_t{64} << s;
        const int stride = s == 0 ? 1 : 2;
        const std::string stage = "conv" + std::to_string(s + 2);
        for (int b = 1; b <= stages[s]; ++b)
            x = bottleneck(g, x, stage + "_block" + std::to_string(b), filters, b == 1 ? stride : 1, b == 1);
    }
    g.mark_backbone_output(x);
    return g;
}

std::string default_tag(Backbone b) {
    switch (b) {
        case Backbone::ResNet50: return "DNN-I";
        case Backbone::ResNet101: return "DNN-II";
        case Backbone::DenseNet121: return "DNN-III";
        case Backbone::DenseNet169: return "DNN-IV";
        case Backbone::Micro: return "micro";
    }
    return "?";
}

}  // namespace

Backbone parse_backbone(std::string_view name) {
    const std::string n = lower(name);
    if (n == "resnet50") return Backbone::ResNet50;
    if (n == "resnet101") return Backbone::ResNet101;
    if (n == "densenet121") return Backbone::DenseNet121;
    if (n == "densenet169") return Backbone::DenseNet169;
    if (n == "micro") return Backbone::Micro;
    throw ArgumentError("unknown backbone '" + std::string(name) +
                        "' (expected resnet50, resnet101, densenet121, densenet169 or micro)");
}

HeadKind parse_head_kind(std::string_view name) {
    const std::string n = lower(name);
    if (n == "gapdense" || n == "gap-dense") return HeadKind::GapDense;
    if (n == "alg1conv" || n == "alg1-conv") return HeadKind::Alg1Conv;
    throw ArgumentError("unknown head kind '" + std::string(name) + "' (expected gapdense or alg1conv)");
}

std::string_view to_string(Backbone backbone) {
    switch (backbone) {
        case Backbone::ResNet50: return "resnet50";
        case Backbone::ResNet101: return "resnet101";
        case Backbone::DenseNet121: return "densenet121";
        case Backbone::DenseNet169: return "densenet169";
        case Backbone::Micro: return "micro";
    }
    return "?";
}

std::string_view to_string(HeadKind head) { return head == HeadKind::GapDense ? "gapdense" : "alg1conv"; }

ModelVariant ModelVariant::parse(std::string_view text) {
    const std::string t = lower(text);
    if (t == "dnn-i") return {Backbone::ResNet50, HeadKind::GapDense};
    if (t == "dnn-ii") return {Backbone::ResNet101, HeadKind::GapDense};
    if (t == "dnn-iii") return {Backbone::DenseNet121, HeadKind::GapDense};
    if (t == "dnn-iv") return {Backbone::DenseNet169, HeadKind::GapDense};
    const auto dash = t.find('-');
    if (dash == std::string::npos) return {parse_backbone(t), HeadKind::GapDense};
    return {parse_backbone(t.substr(0, dash)), parse_head_kind(t.substr(dash + 1))};
}

std::string ModelVariant::name() const { return std::string(to_string(backbone)) + "-" + std::string(to_string(head)); }

std::string ModelVariant::tag() const { return default_tag(backbone); }

ArchitectureGraph build_backbone(Backbone backbone) {
    switch (backbone) {
        case Backbone::ResNet50: return resnet("resnet50", {3, 4, 6, 3});
        case Backbone::ResNet101: return resnet("resnet101", {3, 4, 23, 3});
        case Backbone::DenseNet121: return densenet("densenet121", {6, 12, 24, 16});
        case Backbone::DenseNet169: return densenet("densenet169", {6, 12, 32, 32});
        case Backbone::Micro: return micro_densenet();
    }
    throw ArgumentError("unknown backbone");
}

ArchitectureGraph build_backbone(std::string_view name) { return build_backbone(parse_backbone(name)); }

std::string append_head(ArchitectureGraph& g, const std::string& from, HeadKind kind) {
    std::string x;
    if (kind == HeadKind::GapDense) {
        x = g.global_avg_pool("head_pool", from);
        x = g.dense("head_dense", x, kHeadHiddenUnits, InitScheme::HeUniform);
        x = g.relu("head_relu", x);
    } else {
        x = g.conv("head_conv", from, kHeadConvFilters, 3, 1, ops::Padding::Same, true);
        x = g.relu("head_relu", x);
        x = g.max_pool("head_pool", x, 2, 2);
        x = g.flatten("head_flatten", x);
    }
    x = g.dropout("head_dropout", x, kHeadDropoutRate);
    x = g.dense("head_logits", x, 2, InitScheme::GlorotUniform);
    return g.softmax("head_softmax", x);
}

ArchitectureGraph build_head(std::size_t channels, HeadKind kind, std::size_t spatial) {
    if (channels == 0 || spatial == 0) throw ArgumentError("build_head: channels and spatial extent must be positive");
    ArchitectureGraph g(std::string("head-") + std::string(to_string(kind)), {channels, spatial, spatial});
    append_head(g, "input", kind);
    return g;
}

ArchitectureGraph assemble_model(const ModelVariant& variant) {
    ArchitectureGraph g = build_backbone(variant.backbone);
    g.freeze_all();
    append_head(g, *g.backbone_output(), variant.head);
    return g;
}

std::string group_thousands(std::size_t value) {
    std::string digits = std::to_string(value);
    for (std::size_t i = digits.size(); i > 3; i -= 3) digits.insert(i - 3, ",");
    return digits;
}

std::string format_parameter_table(const ArchitectureGraph& graph) {
    std::ostringstream os;
    os << "model " << graph.tag() << ", input " << shape_to_string(graph.input_shape()) << '\n';
    os << std::left << std::setw(32) << "layer" << std::setw(15) << "kind" << std::setw(18) << "output"
       << std::right << std::setw(12) << "params" << "  trainable\n";
    for (const auto& l : graph.layers()) {
        os << std::left << std::setw(32) << l.name << std::setw(15) << to_string(l.kind) << std::setw(18)
           << shape_to_string(l.output_shape) << std::right << std::setw(12) << l.parameter_count() << "  "
           << (l.parameter_count() == 0 ? "-" : (l.frozen ? "no" : "yes")) << '\n';
    }
    os << "total parameters: " << group_thousands(graph.total_parameters()) << '\n';
    os << "trainable parameters: " << group_thousands(graph.trainable_parameters()) << '\n';
    os << "frozen parameters: " << group_thousands(graph.frozen_parameters()) << '\n';
    return os.str();
}

}  // namespace covilearn
