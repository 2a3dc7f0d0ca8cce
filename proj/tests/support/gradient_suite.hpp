#pragma once

#include <string>
#include <vector>

#include "covilearn/architecture.hpp"
#include "covilearn/autodiff.hpp"
#include "covilearn/executor.hpp"
#include "covilearn/parameters.hpp"
#include "covilearn/training.hpp"
#include "oracles.hpp"

namespace oracle {

struct LayerGradientCase {
    std::string name;
    GradientReport report;
};

inline constexpr std::size_t kCoordsPerLayer = 100;

namespace detail {

using covilearn::Tape;
using covilearn::Var;
namespace ad = covilearn::ad;

inline LayerGradientCase op_case(std::string name, NamedTensors values, const LossBuilder& build, std::uint64_t seed) {
    return {std::move(name), check_gradients(values, build, kCoordsPerLayer, seed)};
}

// One parameterized layer of an assembled graph, evaluated alone on a random
// batch, with all its parameters differentiable.
inline LayerGradientCase graph_layer_case(covilearn::ArchitectureGraph graph, const std::string& layer,
                                          std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    graph.set_frozen(layer, false);
    const auto& spec = graph.layer(layer);
    const auto& in_name = spec.inputs.at(0);
    Shape in_shape{2};
    const auto& per_sample = graph.layer(in_name).output_shape;
    in_shape.insert(in_shape.end(), per_sample.begin(), per_sample.end());
    const Tensor input = random_tensor(in_shape, rng);

    NamedTensors values;
    for (const auto& p : spec.params) {
        switch (p.role) {
            case covilearn::ParamRole::Gamma: values[p.name] = random_tensor(p.shape, rng, 0.5, 1.5); break;
            case covilearn::ParamRole::MovingVariance: values[p.name] = random_tensor(p.shape, rng, 0.5, 2.0); break;
            default: values[p.name] = random_tensor(p.shape, rng, -0.5, 0.5); break;
        }
    }
    Shape out_shape{2};
    out_shape.insert(out_shape.end(), spec.output_shape.begin(), spec.output_shape.end());
    const Tensor weights = random_tensor(out_shape, rng);

    covilearn::ParameterStore base;
    const LossBuilder build = [&, graph](Tape& tape, const NamedTensors& v) {
        covilearn::ParameterStore ps = base;
        for (const auto& [n, t] : v) ps.set(n, t);
        covilearn::LayerValues seeds;
        seeds.emplace(in_name, input);
        return ad::weighted_sum(covilearn::forward_on_tape(tape, graph, ps, std::move(seeds), layer), weights);
    };
    return {graph.tag() + ":" + layer, check_gradients(values, build, kCoordsPerLayer, seed + 1)};
}

}  // namespace detail

// Finite-difference checks over the parameterized ops and every
// parameterized layer of the micro model (both heads).
inline std::vector<LayerGradientCase> run_gradient_suite(std::uint64_t seed = 2024) {
    using namespace detail;
    std::vector<LayerGradientCase> cases;
    std::mt19937_64 rng(seed);

    {
        NamedTensors v{{"x", random_tensor({2, 3, 6, 6}, rng)},
                       {"k", random_tensor({4, 3, 3, 3}, rng)},
                       {"b", random_tensor({4}, rng)}};
        const Tensor w = random_tensor({2, 4, 4, 4}, rng);
        cases.push_back(op_case(
            "conv2d valid s1 bias", v,
            [w](Tape& t, const NamedTensors& p) {
                return ad::weighted_sum(ad::conv2d(t.parameter("x", p.at("x")), t.parameter("k", p.at("k")),
                                                   t.parameter("b", p.at("b")), {1, covilearn::ops::Padding::Valid}),
                                        w);
            },
            rng()));
    }
    {
        NamedTensors v{{"x", random_tensor({1, 2, 7, 7}, rng)}, {"k", random_tensor({3, 2, 3, 3}, rng)}};
        const Tensor w = random_tensor({1, 3, 4, 4}, rng);
        cases.push_back(op_case(
            "conv2d same s2", v,
            [w](Tape& t, const NamedTensors& p) {
                return ad::weighted_sum(ad::conv2d(t.parameter("x", p.at("x")), t.parameter("k", p.at("k")),
                                                   std::nullopt, {2, covilearn::ops::Padding::Same}),
                                        w);
            },
            rng()));
    }
    {
        NamedTensors v{{"x", random_tensor({2, 3, 4, 4}, rng)},
                       {"gamma", random_tensor({3}, rng, 0.5, 1.5)},
                       {"beta", random_tensor({3}, rng)},
                       {"mean", random_tensor({3}, rng)},
                       {"var", random_tensor({3}, rng, 0.5, 2.0)}};
        const Tensor w = random_tensor({2, 3, 4, 4}, rng);
        cases.push_back(op_case(
            "batchnorm", v,
            [w](Tape& t, const NamedTensors& p) {
                return ad::weighted_sum(ad::batchnorm(t.parameter("x", p.at("x")), t.parameter("gamma", p.at("gamma")),
                                                      t.parameter("beta", p.at("beta")),
                                                      t.parameter("mean", p.at("mean")),
                                                      t.parameter("var", p.at("var")), 1.001e-5),
                                        w);
            },
            rng()));
    }
    {
        NamedTensors v{{"x", random_tensor({4, 5}, rng)},
                       {"w", random_tensor({5, 3}, rng)},
                       {"b", random_tensor({3}, rng)}};
        const Tensor wsum = random_tensor({4, 3}, rng);
        cases.push_back(op_case(
            "dense_affine", v,
            [wsum](Tape& t, const NamedTensors& p) {
                return ad::weighted_sum(ad::dense_affine(t.parameter("x", p.at("x")), t.parameter("w", p.at("w")),
                                                         t.parameter("b", p.at("b"))),
                                        wsum);
            },
            rng()));
    }
    {
        NamedTensors v{{"x", random_tensor({4, 6}, rng)},
                       {"w", random_tensor({6, 2}, rng)},
                       {"b", random_tensor({2}, rng)}};
        Tensor y({4, 2});
        for (std::size_t n = 0; n < 4; ++n) y[n * 2 + n % 2] = 1.0;
        cases.push_back(op_case(
            "dense_affine + softmax + bce", v,
            [y](Tape& t, const NamedTensors& p) {
                return covilearn::bce_loss(ad::softmax(ad::dense_affine(
                                               t.parameter("x", p.at("x")), t.parameter("w", p.at("w")),
                                               t.parameter("b", p.at("b")))),
                                           y);
            },
            rng()));
    }

    for (const char* variant : {"micro-gapdense", "micro-alg1conv"}) {
        const auto graph = covilearn::assemble_model(covilearn::ModelVariant::parse(variant));
        for (const auto& layer : graph.layers()) {
            if (layer.params.empty()) continue;
            if (std::string(variant) == "micro-alg1conv" && layer.name.rfind("head_", 0) != 0) continue;
            cases.push_back(graph_layer_case(graph, layer.name, rng()));
        }
    }
    return cases;
}

}  // namespace oracle
