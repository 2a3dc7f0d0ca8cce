#pragma once

// Evaluates an ArchitectureGraph against a ParameterStore, either as plain
// tensors (inference, feature extraction) or on a gradient tape (training).

#include <cstdint>
#include <map>
#include <string>
#include <string_view>

#include "covilearn/architecture.hpp"
#include "covilearn/autodiff.hpp"
#include "covilearn/ops.hpp"
#include "covilearn/parameters.hpp"

namespace covilearn {

struct ForwardOptions {
    ops::DropoutMode mode = ops::DropoutMode::Infer;
    std::uint64_t dropout_seed = 0;
};

// Layer values known up front, keyed by layer name. Evaluation only visits
// layers the target depends on that are not already seeded.
using LayerValues = std::map<std::string, Tensor, std::less<>>;

// Runs from the graph input (N,C,H,W) to `target` (the output layer when empty).
Tensor forward(const ArchitectureGraph& graph, const ParameterStore& params, const Tensor& input,
               const ForwardOptions& options = {}, std::string_view target = {});

Tensor forward_from(const ArchitectureGraph& graph, const ParameterStore& params, LayerValues seeds,
                    std::string_view target, const ForwardOptions& options = {});

// Tape variant: parameters of non-frozen layers become differentiable leaves,
// everything else enters as a constant.
Var forward_on_tape(Tape& tape, const ArchitectureGraph& graph, const ParameterStore& params, LayerValues seeds,
                    std::string_view target, const ForwardOptions& options = {});

}  // namespace covilearn
