#include <gtest/gtest.h>

#include "covilearn/autodiff.hpp"
#include "covilearn/errors.hpp"
#include "support/gradient_suite.hpp"
#include "support/oracles.hpp"

using namespace covilearn;
using oracle::NamedTensors;

TEST(Tape, ProductRule) {
    Tape tape;
    auto w = tape.parameter("w", Tensor::from({1, 1}, {2}));
    auto x = tape.constant(Tensor::from({1, 1}, {3}));
    auto f = ad::dense_affine(x, w, tape.constant(Tensor::from({1}, {0})));
    const auto grads = tape.backward(ad::weighted_sum(f, Tensor::from({1, 1}, {1})));
    EXPECT_EQ(grads.at("w")[0], 3.0);
    EXPECT_EQ(grads.size(), 1u);
}

TEST(Tape, DeadReluPassesNoGradient) {
    Tape tape;
    auto x = tape.parameter("x", Tensor::from({2}, {-1.5, 2.0}));
    const auto grads = tape.backward(ad::weighted_sum(ad::relu(x), Tensor::from({2}, {1, 1})));
    EXPECT_EQ(grads.at("x")[0], 0.0);
    EXPECT_EQ(grads.at("x")[1], 1.0);
}

TEST(Tape, NonScalarLossRejected) {
    Tape tape;
    auto x = tape.parameter("x", Tensor({2}, 1.0));
    EXPECT_THROW(tape.backward(ad::relu(x)), ArgumentError);
}

TEST(Tape, ConstantsGetNoGradient) {
    Tape tape;
    auto a = tape.constant(Tensor({2}, 1.0));
    auto b = tape.parameter("b", Tensor({2}, 1.0));
    auto s = ad::add(a, b);
    EXPECT_FALSE(tape.requires_grad(a.id));
    EXPECT_TRUE(tape.requires_grad(s.id));
    const auto grads = tape.backward(ad::weighted_sum(s, Tensor::from({2}, {1, 2})));
    EXPECT_EQ(grads.size(), 1u);
    EXPECT_EQ(grads.at("b"), Tensor::from({2}, {1, 2}));
}

TEST(Tape, SharedParameterAccumulates) {
    Tape tape;
    auto x = tape.parameter("x", Tensor::from({1}, {4}));
    const auto grads = tape.backward(ad::weighted_sum(ad::add(x, x), Tensor::from({1}, {1})));
    EXPECT_EQ(grads.at("x")[0], 2.0);
}

TEST(GradientSuite, EveryParameterizedLayerMatchesFiniteDifferences) {
    for (const auto& c : oracle::run_gradient_suite()) {
        EXPECT_GE(c.report.checked, std::min(oracle::kCoordsPerLayer, c.report.available)) << c.name;
        EXPECT_LT(c.report.max_rel_error, oracle::kGradientRelTolerance) << c.name << " worst " << c.report.worst;
    }
}

namespace {

void expect_input_gradient(const char* what, const Tensor& x, const std::function<Var(Tape&, Var)>& op,
                           const Tensor& weights) {
    NamedTensors v{{"x", x}};
    const auto report = oracle::check_gradients(
        v, [&](Tape& t, const NamedTensors& p) { return ad::weighted_sum(op(t, t.parameter("x", p.at("x"))), weights); },
        oracle::kCoordsPerLayer, 17);
    EXPECT_LT(report.max_rel_error, oracle::kGradientRelTolerance) << what << " worst " << report.worst;
}

// Values bounded away from zero and from each other by more than the
// finite-difference step, so kinks are never crossed.
Tensor spaced_values(const Shape& shape, std::uint64_t seed) {
    Tensor t(shape);
    std::vector<double> v(t.size());
    for (std::size_t i = 0; i < v.size(); ++i) v[i] = (static_cast<double>(i) + 1.0) * 0.01 - 0.005 * v.size();
    std::mt19937_64 rng(seed);
    std::shuffle(v.begin(), v.end(), rng);
    for (std::size_t i = 0; i < v.size(); ++i) t[i] = v[i] + (v[i] >= 0 ? 0.0025 : -0.0025);
    return t;
}

}  // namespace

TEST(GradientSuite, ParameterFreeOps) {
    std::mt19937_64 rng(31);
    const Shape s{2, 3, 4, 4};
    const auto x = spaced_values(s, 1);
    expect_input_gradient("relu", x, [](Tape&, Var v) { return ad::relu(v); }, oracle::random_tensor(s, rng));
    expect_input_gradient("max_pool", x, [](Tape&, Var v) { return ad::max_pool2d(v, 2, 2); },
                          oracle::random_tensor({2, 3, 2, 2}, rng));
    expect_input_gradient("max_pool overlapping", x, [](Tape&, Var v) { return ad::max_pool2d(v, 3, 1); },
                          oracle::random_tensor({2, 3, 2, 2}, rng));
    expect_input_gradient("avg_pool", x, [](Tape&, Var v) { return ad::avg_pool2d(v, 2, 2); },
                          oracle::random_tensor({2, 3, 2, 2}, rng));
    expect_input_gradient("global_avg_pool", x, [](Tape&, Var v) { return ad::global_avg_pool(v); },
                          oracle::random_tensor({2, 3}, rng));
    expect_input_gradient("zero_pad", x, [](Tape&, Var v) { return ad::zero_pad2d(v, {1, 2, 0, 1}); },
                          oracle::random_tensor({2, 3, 7, 5}, rng));
    expect_input_gradient("flatten", x, [](Tape&, Var v) { return ad::flatten(v); },
                          oracle::random_tensor({2, 48}, rng));
    expect_input_gradient("dropout", x,
                          [](Tape&, Var v) { return ad::dropout(v, 0.5, ops::DropoutMode::Train, 8); },
                          oracle::random_tensor(s, rng));
    const auto other = oracle::random_tensor({2, 2, 4, 4}, rng);
    expect_input_gradient(
        "concat", x,
        [&](Tape& t, Var v) {
            const Var parts[] = {t.constant(other), v, v};
            return ad::concat_channels(parts);
        },
        oracle::random_tensor({2, 8, 4, 4}, rng));
    expect_input_gradient("add", x, [&](Tape& t, Var v) { return ad::add(v, t.constant(x)); },
                          oracle::random_tensor(s, rng));
    expect_input_gradient("softmax", oracle::random_tensor({3, 4}, rng, -2, 2),
                          [](Tape&, Var v) { return ad::softmax(v); }, oracle::random_tensor({3, 4}, rng));
}
