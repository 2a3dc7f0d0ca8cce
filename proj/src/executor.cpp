#include "covilearn/executor.hpp"

#include <algorithm>
#include <optional>
#include <vector>

#include "covilearn/errors.hpp"

namespace covilearn {

namespace {

// Layers needed to produce `target`, in graph order, stopping at seeds.
std::vector<std::size_t> evaluation_plan(const ArchitectureGraph& graph, const LayerValues& seeds,
                                         std::size_t target) {
    const auto& layers = graph.layers();
    std::vector<bool> needed(layers.size(), false);
    needed[target] = true;
    for (std::size_t i = target + 1; i-- > 0;) {
        if (!needed[i] || seeds.contains(layers[i].name)) continue;
        if (layers[i].kind == LayerKind::Input)
            throw ArgumentError("forward: graph input is required but was not provided");
        for (const auto& in : layers[i].inputs) needed[graph.index_of(in)] = true;
    }
    std::vector<std::size_t> plan;
    for (std::size_t i = 0; i <= target; ++i)
        if (needed[i] && !seeds.contains(layers[i].name)) plan.push_back(i);
    return plan;
}

std::size_t resolve_target(const ArchitectureGraph& graph, std::string_view target) {
    return target.empty() ? graph.layers().size() - 1 : graph.index_of(target);
}

void check_seed_shapes(const ArchitectureGraph& graph, const LayerValues& seeds, std::optional<std::size_t>& batch) {
    for (const auto& [name, value] : seeds) {
        const LayerSpec& l = graph.layer(name);
        Shape expected{value.rank() > 0 ? value.dim(0) : 0};
        expected.insert(expected.end(), l.output_shape.begin(), l.output_shape.end());
        if (value.shape() != expected)
            throw DimensionError("layer '" + name + "' expects " + shape_to_string(expected) + ", got " +
                                 shape_to_string(value.shape()));
        if (batch && *batch != value.dim(0)) throw DimensionError("forward: seeded values disagree on batch size");
        batch = value.dim(0);
    }
}

void check_output(const LayerSpec& layer, const Tensor& value, std::size_t batch) {
    Shape expected{batch};
    expected.insert(expected.end(), layer.output_shape.begin(), layer.output_shape.end());
    if (value.shape() != expected)
        throw DimensionError("layer '" + layer.name + "' produced " + shape_to_string(value.shape()) +
                             ", declared " + shape_to_string(expected));
    if (!value.all_finite()) throw ArgumentError("layer '" + layer.name + "' produced a non-finite value");
}

// Last plan position at which each layer's value is read.
std::map<std::string, std::size_t, std::less<>> last_uses(const ArchitectureGraph& graph,
                                                          const std::vector<std::size_t>& plan) {
    std::map<std::string, std::size_t, std::less<>> last;
    for (std::size_t step = 0; step < plan.size(); ++step)
        for (const auto& in : graph.layers()[plan[step]].inputs) last[in] = step;
    return last;
}

}  // namespace

Tensor forward(const ArchitectureGraph& graph, const ParameterStore& params, const Tensor& input,
               const ForwardOptions& options, std::string_view target) {
    LayerValues seeds;
    seeds.emplace("input", input);
    return forward_from(graph, params, std::move(seeds), target, options);
}

Tensor forward_from(const ArchitectureGraph& graph, const ParameterStore& params, LayerValues values,
                    std::string_view target_name, const ForwardOptions& options) {
    const std::size_t target = resolve_target(graph, target_name);
    std::optional<std::size_t> batch;
    check_seed_shapes(graph, values, batch);
    if (auto it = values.find(graph.layers()[target].name); it != values.end()) return it->second;

    const auto plan = evaluation_plan(graph, values, target);
    const auto last = last_uses(graph, plan);
    const auto& layers = graph.layers();

    for (std::size_t step = 0; step < plan.size(); ++step) {
        const std::size_t idx = plan[step];
        const LayerSpec& l = layers[idx];
        auto in = [&](std::size_t k) -> const Tensor& { return values.at(l.inputs[k]); };
        auto p = [&](const char* role) -> const Tensor& { return params.at(l.name + "/" + role); };
        Tensor out;
        switch (l.kind) {
            case LayerKind::Input: throw ArgumentError("forward: graph input was not provided");
            case LayerKind::ZeroPad: out = ops::zero_pad2d(in(0), l.attrs.pad); break;
            case LayerKind::Conv:
                out = ops::conv2d(in(0), p("kernel"), l.attrs.use_bias ? p("bias") : Tensor(),
                                  {l.attrs.stride, l.attrs.padding});
                break;
            case LayerKind::BatchNorm:
                out = ops::batchnorm_infer(in(0), p("gamma"), p("beta"), p("moving_mean"), p("moving_variance"),
                                           l.attrs.eps);
                break;
            case LayerKind::Relu: out = ops::relu(in(0)); break;
            case LayerKind::MaxPool: out = ops::max_pool2d(in(0), l.attrs.window, l.attrs.stride); break;
            case LayerKind::AvgPool: out = ops::avg_pool2d(in(0), l.attrs.window, l.attrs.stride); break;
            case LayerKind::GlobalAvgPool: out = ops::global_avg_pool(in(0)); break;
            case LayerKind::Concat: {
                std::vector<const Tensor*> parts;
                for (const auto& name : l.inputs) parts.push_back(&values.at(name));
                out = ops::concat_channels(std::span<const Tensor* const>(parts));
                break;
            }
            case LayerKind::Add: out = ops::add(in(0), in(1)); break;
            case LayerKind::Flatten: out = ops::flatten(in(0)); break;
            case LayerKind::Dense: out = ops::dense_affine(in(0), p("kernel"), p("bias")); break;
            case LayerKind::Dropout:
                out = ops::dropout(in(0), l.attrs.rate, options.mode, mix_seed(options.dropout_seed, l.name));
                break;
            case LayerKind::Softmax: out = ops::softmax(in(0)); break;
        }
        if (!batch) batch = out.dim(0);
        check_output(l, out, *batch);
        values.insert_or_assign(l.name, std::move(out));

        for (const auto& name : l.inputs) {
            auto it = last.find(name);
            if (it != last.end() && it->second == step && name != l.name) values.erase(name);
        }
    }
    return std::move(values.at(layers[target].name));
}

Var forward_on_tape(Tape& tape, const ArchitectureGraph& graph, const ParameterStore& params, LayerValues seeds,
                    std::string_view target_name, const ForwardOptions& options) {
    const std::size_t target = resolve_target(graph, target_name);
    std::optional<std::size_t> batch;
    check_seed_shapes(graph, seeds, batch);

    std::map<std::string, Var, std::less<>> vars;
    for (auto& [name, value] : seeds) vars.emplace(name, tape.constant(std::move(value)));
    if (auto it = vars.find(graph.layers()[target].name); it != vars.end()) return it->second;

    const auto plan = evaluation_plan(graph, seeds, target);
    for (const std::size_t idx : plan) {
        const LayerSpec& l = graph.layers()[idx];
        auto in = [&](std::size_t k) { return vars.at(l.inputs[k]); };
        auto p = [&](const char* role) {
            std::string name = l.name + "/" + role;
            const Tensor& value = params.at(name);
            return l.frozen ? tape.constant(value) : tape.parameter(std::move(name), value);
        };
        Var out;
        switch (l.kind) {
            case LayerKind::Input: throw ArgumentError("forward: graph input was not provided");
            case LayerKind::ZeroPad: out = ad::zero_pad2d(in(0), l.attrs.pad); break;
            case LayerKind::Conv: {
                Var kernel = p("kernel");
                std::optional<Var> bias;
                if (l.attrs.use_bias) bias = p("bias");
                out = ad::conv2d(in(0), kernel, bias, {l.attrs.stride, l.attrs.padding});
                break;
            }
            case LayerKind::BatchNorm: {
                Var gamma = p("gamma"), beta = p("beta"), mean = p("moving_mean"), var = p("moving_variance");
                out = ad::batchnorm(in(0), gamma, beta, mean, var, l.attrs.eps);
                break;
            }
            case LayerKind::Relu: out = ad::relu(in(0)); break;
            case LayerKind::MaxPool: out = ad::max_pool2d(in(0), l.attrs.window, l.attrs.stride); break;
            case LayerKind::AvgPool: out = ad::avg_pool2d(in(0), l.attrs.window, l.attrs.stride); break;
            case LayerKind::GlobalAvgPool: out = ad::global_avg_pool(in(0)); break;
            case LayerKind::Concat: {
                std::vector<Var> parts;
                for (const auto& name : l.inputs) parts.push_back(vars.at(name));
                out = ad::concat_channels(parts);
                break;
            }
            case LayerKind::Add: out = ad::add(in(0), in(1)); break;
            case LayerKind::Flatten: out = ad::flatten(in(0)); break;
            case LayerKind::Dense: {
                Var w = p("kernel"), b = p("bias");
                out = ad::dense_affine(in(0), w, b);
                break;
            }
            case LayerKind::Dropout:
                out = ad::dropout(in(0), l.attrs.rate, options.mode, mix_seed(options.dropout_seed, l.name));
                break;
            case LayerKind::Softmax: out = ad::softmax(in(0)); break;
        }
        if (!batch) batch = out.value().dim(0);
        check_output(l, out.value(), *batch);
        vars.insert_or_assign(l.name, out);
    }
    return vars.at(graph.layers()[target].name);
}

}  // namespace covilearn
