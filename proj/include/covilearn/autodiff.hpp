#pragma once

// Reverse-mode differentiation over a linear tape of recorded operations.
//
// A Tape owns every intermediate value. Var is a lightweight handle into it.
// Leaves are either named parameters (differentiated) or constants (not).
// Nodes whose inputs never require gradients get no gradient storage, so
// frozen sub-graphs cost nothing on the backward pass.

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "covilearn/ops.hpp"
#include "covilearn/tensor.hpp"

namespace covilearn {

class Tape;

struct Var {
    Tape* tape = nullptr;
    std::size_t id = 0;

    const Tensor& value() const;
    const Shape& shape() const { return value().shape(); }
};

using GradientMap = std::map<std::string, Tensor>;

class Tape {
public:
    // Receives the upstream gradient and one slot per input; a slot is null
    // when that input does not require a gradient.
    using BackwardFn = std::function<void(const Tensor& grad_out, std::span<Tensor* const> grad_inputs)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var parameter(std::string name, Tensor value);
    Var constant(Tensor value);

    Var record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward);

    const Tensor& value(std::size_t id) const { return nodes_.at(id).value; }
    bool requires_grad(std::size_t id) const { return nodes_.at(id).requires_grad; }
    std::size_t size() const noexcept { return nodes_.size(); }

    // Gradients of a scalar node with respect to every reachable parameter.
    GradientMap backward(Var loss) const;

private:
    struct Node {
        Tensor value;
        std::vector<std::size_t> inputs;
        BackwardFn backward;
        bool requires_grad = false;
        std::optional<std::string> name;
    };
    std::vector<Node> nodes_;
};

// Differentiable counterparts of the ops:: kernels.
namespace ad {

Var conv2d(Var input, Var kernel, std::optional<Var> bias, const ops::Conv2dOptions& opts);
Var zero_pad2d(Var input, const ops::PadAmounts& pad);
Var batchnorm(Var input, Var gamma, Var beta, Var mean, Var var, double eps);
Var relu(Var input);
Var max_pool2d(Var input, int window, int stride);
Var avg_pool2d(Var input, int window, int stride);
Var global_avg_pool(Var input);
Var concat_channels(std::span<const Var> inputs);
Var add(Var a, Var b);
Var dense_affine(Var input, Var weight, Var bias);
Var flatten(Var input);
Var dropout(Var input, double rate, ops::DropoutMode mode, std::uint64_t seed);
Var softmax(Var logits);

// Scalar sum(x * weights); a convenient loss for gradient checks.
Var weighted_sum(Var input, const Tensor& weights);

}  // namespace ad

}  // namespace covilearn
