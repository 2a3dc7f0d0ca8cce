#include "covilearn/autodiff.hpp"

#include "covilearn/errors.hpp"

namespace covilearn {

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::parameter(std::string name, Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, nullptr, true, std::move(name)});
    return Var{this, nodes_.size() - 1};
}

Var Tape::constant(Tensor value) {
    nodes_.push_back(Node{std::move(value), {}, nullptr, false, std::nullopt});
    return Var{this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> inputs, BackwardFn backward) {
    bool needs = false;
    for (auto i : inputs) {
        if (i >= nodes_.size()) throw ArgumentError("tape: input node does not exist");
        needs = needs || nodes_[i].requires_grad;
    }
    nodes_.push_back(Node{std::move(value), std::move(inputs), needs ? std::move(backward) : nullptr, needs,
                          std::nullopt});
    return Var{this, nodes_.size() - 1};
}

GradientMap Tape::backward(Var loss) const {
    if (loss.tape != this) throw ArgumentError("backward: loss belongs to another tape");
    const Tensor& lv = value(loss.id);
    if (lv.size() != 1)
        throw ArgumentError("backward: loss must be scalar, got shape " + shape_to_string(lv.shape()));

    GradientMap result;
    if (!nodes_[loss.id].requires_grad) return result;

    std::vector<std::optional<Tensor>> grads(loss.id + 1);
    grads[loss.id] = Tensor(lv.shape(), 1.0);

    for (std::size_t id = loss.id + 1; id-- > 0;) {
        const Node& node = nodes_[id];
        if (!grads[id]) continue;
        if (node.name) {
            auto [it, inserted] = result.try_emplace(*node.name, *grads[id]);
            if (!inserted) {
                for (std::size_t i = 0; i < it->second.size(); ++i) it->second[i] += (*grads[id])[i];
            }
            continue;
        }
        if (!node.backward) continue;
        std::vector<Tensor*> slots(node.inputs.size(), nullptr);
        for (std::size_t k = 0; k < node.inputs.size(); ++k) {
            const std::size_t in = node.inputs[k];
            if (!nodes_[in].requires_grad) continue;
            if (!grads[in]) grads[in] = Tensor(nodes_[in].value.shape());
            slots[k] = &*grads[in];
        }
        node.backward(*grads[id], slots);
        grads[id].reset();
    }
    return result;
}

namespace ad {

namespace {

void accumulate(Tensor* slot, const Tensor& g) {
    if (!slot) return;
    for (std::size_t i = 0; i < slot->size(); ++i) (*slot)[i] += g[i];
}

Tape& same_tape(std::initializer_list<Var> vars) {
    Tape* t = vars.begin()->tape;
    for (const Var& v : vars)
        if (v.tape != t) throw ArgumentError("autodiff: operands recorded on different tapes");
    return *t;
}

}  // namespace

Var conv2d(Var input, Var kernel, std::optional<Var> bias, const ops::Conv2dOptions& opts) {
    Tape& tape = bias ? same_tape({input, kernel, *bias}) : same_tape({input, kernel});
    Tensor out = ops::conv2d(input.value(), kernel.value(), bias ? bias->value() : Tensor(), opts);
    std::vector<std::size_t> ins{input.id, kernel.id};
    if (bias) ins.push_back(bias->id);
    const bool has_bias = bias.has_value();
    return tape.record(std::move(out), std::move(ins),
                       [&tape, in = input.id, k = kernel.id, has_bias, opts](const Tensor& g, std::span<Tensor* const> s) {
                           auto grads = ops::conv2d_backward(tape.value(in), tape.value(k), has_bias, g, opts);
                           accumulate(s[0], grads.input);
                           accumulate(s[1], grads.kernel);
                           if (has_bias) accumulate(s[2], grads.bias);
                       });
}

Var zero_pad2d(Var input, const ops::PadAmounts& pad) {
    Tape& tape = *input.tape;
    return tape.record(ops::zero_pad2d(input.value(), pad), {input.id},
                       [pad](const Tensor& g, std::span<Tensor* const> s) {
                           accumulate(s[0], ops::zero_pad2d_backward(g, pad));
                       });
}

Var batchnorm(Var input, Var gamma, Var beta, Var mean, Var var, double eps) {
    Tape& tape = same_tape({input, gamma, beta, mean, var});
    Tensor out = ops::batchnorm_infer(input.value(), gamma.value(), beta.value(), mean.value(), var.value(), eps);
    return tape.record(std::move(out), {input.id, gamma.id, beta.id, mean.id, var.id},
                       [&tape, x = input.id, ga = gamma.id, mu = mean.id, va = var.id, eps](
                           const Tensor& g, std::span<Tensor* const> s) {
                           auto grads = ops::batchnorm_backward(tape.value(x), tape.value(ga), tape.value(mu),
                                                                tape.value(va), eps, g);
                           accumulate(s[0], grads.input);
                           accumulate(s[1], grads.gamma);
                           accumulate(s[2], grads.beta);
                           accumulate(s[3], grads.mean);
                           accumulate(s[4], grads.var);
                       });
}

Var relu(Var input) {
    Tape& tape = *input.tape;
    return tape.record(ops::relu(input.value()), {input.id},
                       [&tape, x = input.id](const Tensor& g, std::span<Tensor* const> s) {
                           accumulate(s[0], ops::relu_backward(tape.value(x), g));
                       });
}

Var max_pool2d(Var input, int window, int stride) {
    Tape& tape = *input.tape;
    return tape.record(ops::max_pool2d(input.value(), window, stride), {input.id},
                       [&tape, x = input.id, window, stride](const Tensor& g, std::span<Tensor* const> s) {
                           accumulate(s[0], ops::max_pool2d_backward(tape.value(x), window, stride, g));
                       });
}

Var avg_pool2d(Var input, int window, int stride) {
    Tape& tape = *input.tape;
    return tape.record(ops::avg_pool2d(input.value(), window, stride), {input.id},
                       [shape = input.shape(), window, stride](const Tensor& g, std::span<Tensor* const> s) {
                           accumulate(s[0], ops::avg_pool2d_backward(shape, window, stride, g));
                       });
}

Var global_avg_pool(Var input) {
    Tape& tape = *input.tape;
    return tape.record(ops::global_avg_pool(input.value()), {input.id},
                       [shape = input.shape()](const Tensor& g, std::span<Tensor* const> s) {
                           accumulate(s[0], ops::global_avg_pool_backward(shape, g));
                       });
}

Var concat_channels(std::span<const Var> inputs) {
    if (inputs.empty()) throw ArgumentError("concat_channels: no inputs");
    Tape& tape = *inputs.front().tape;
    std::vector<const Tensor*> values;
    std::vector<std::size_t> ids;
    std::vector<Shape> shapes;
    for (const Var& v : inputs) {
        if (v.tape != &tape) throw ArgumentError("autodiff: operands recorded on different tapes");
        values.push_back(&v.value());
        ids.push_back(v.id);
        shapes.push_back(v.shape());
    }
    Tensor out = ops::concat_channels(std::span<const Tensor* const>(values));
    return tape.record(std::move(out), std::move(ids),
                       [shapes = std::move(shapes)](const Tensor& g, std::span<Tensor* const> s) {
                           auto parts = ops::concat_channels_backward(shapes, g);
                           for (std::size_t k = 0; k < parts.size(); ++k) accumulate(s[k], parts[k]);
                       });
}

Var add(Var a, Var b) {
    Tape& tape = same_tape({a, b});
    return tape.record(ops::add(a.value(), b.value()), {a.id, b.id},
                       [](const Tensor& g, std::span<Tensor* const> s) {
                           accumulate(s[0], g);
                           accumulate(s[1], g);
                       });
}

Var dense_affine(Var input, Var weight, Var bias) {
    Tape& tape = same_tape({input, weight, bias});
    Tensor out = ops::dense_affine(input.value(), weight.value(), bias.value());
    return tape.record(std::move(out), {input.id, weight.id, bias.id},
                       [&tape, x = input.id, w = weight.id](const Tensor& g, std::span<Tensor* const> s) {
                           auto grads = ops::dense_affine_backward(tape.value(x), tape.value(w), g);
                           accumulate(s[0], grads.input);
                           accumulate(s[1], grads.weight);
                           accumulate(s[2], grads.bias);
                       });
}

Var flatten(Var input) {
    Tape& tape = *input.tape;
    return tape.record(ops::flatten(input.value()), {input.id},
                       [](const Tensor& g, std::span<Tensor* const> s) {
                           if (!s[0]) return;
                           for (std::size_t i = 0; i < g.size(); ++i) (*s[0])[i] += g[i];
                       });
}

Var dropout(Var input, double rate, ops::DropoutMode mode, std::uint64_t seed) {
    Tape& tape = *input.tape;
    if (!(rate >= 0.0 && rate < 1.0)) throw ArgumentError("dropout: rate must lie in [0,1), got " + std::to_string(rate));
    if (mode == ops::DropoutMode::Infer || rate == 0.0) {
        return tape.record(input.value(), {input.id},
                           [](const Tensor& g, std::span<Tensor* const> s) { accumulate(s[0], g); });
    }
    Tensor mask = ops::dropout_mask(input.shape(), rate, seed);
    Tensor out = ops::multiply(input.value(), mask);
    return tape.record(std::move(out), {input.id},
                       [mask = std::move(mask)](const Tensor& g, std::span<Tensor* const> s) {
                           accumulate(s[0], ops::multiply(g, mask));
                       });
}

Var softmax(Var logits) {
    Tape& tape = *logits.tape;
    Tensor out = ops::softmax(logits.value());
    return tape.record(out, {logits.id}, [y = out](const Tensor& g, std::span<Tensor* const> s) {
        accumulate(s[0], ops::softmax_backward(y, g));
    });
}

Var weighted_sum(Var input, const Tensor& weights) {
    Tape& tape = *input.tape;
    if (weights.shape() != input.shape())
        throw DimensionError("weighted_sum: weights " + shape_to_string(weights.shape()) + " vs input " +
                             shape_to_string(input.shape()));
    double acc = 0.0;
    for (std::size_t i = 0; i < weights.size(); ++i) acc += input.value()[i] * weights[i];
    return tape.record(Tensor::scalar(acc), {input.id},
                       [weights](const Tensor& g, std::span<Tensor* const> s) {
                           if (!s[0]) return;
                           for (std::size_t i = 0; i < weights.size(); ++i) (*s[0])[i] += g[0] * weights[i];
                       });
}

}  // namespace ad

}  // namespace covilearn
