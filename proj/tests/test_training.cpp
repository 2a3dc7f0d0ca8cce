#include <gtest/gtest.h>

#include <cmath>

#include "covilearn/architecture.hpp"
#include "covilearn/errors.hpp"
#include "covilearn/preprocess.hpp"
#include "covilearn/synthetic.hpp"
#include "covilearn/training.hpp"
#include "covilearn/weights_io.hpp"
#include "support/oracles.hpp"

using namespace covilearn;

namespace {

std::vector<Sample> centered(std::vector<Sample> samples, const ChannelMean& mean) {
    for (auto& s : samples) s.pixels = subtract_channel_mean(std::move(s.pixels), mean);
    return samples;
}

struct SyntheticSplit {
    std::vector<Sample> train, test;
};

SyntheticSplit synthetic_split(std::size_t count, std::uint64_t seed) {
    auto all = make_separable_samples(count, 32, seed);
    const std::size_t n_test = count / 5;
    std::vector<Sample> train(all.begin(), all.end() - static_cast<std::ptrdiff_t>(n_test));
    std::vector<Sample> test(all.end() - static_cast<std::ptrdiff_t>(n_test), all.end());
    std::vector<Tensor> px;
    for (const auto& s : train) px.push_back(s.pixels);
    const auto mean = channel_means(px);
    return {centered(std::move(train), mean), centered(std::move(test), mean)};
}

}  // namespace

TEST(Bce, ClosedForms) {
    const auto y = Tensor::from({1, 2}, {1, 0});
    EXPECT_LE(bce_loss(Tensor::from({1, 2}, {1, 0}), y), 1.2e-7);
    EXPECT_NEAR(bce_loss(Tensor::from({1, 2}, {0.5, 0.5}), y), std::log(2.0), 1e-12);
    EXPECT_NEAR(bce_loss(Tensor::from({1, 2}, {0, 1}), y), -std::log(1e-7), 1e-12);
    EXPECT_NEAR(bce_loss(Tensor::from({1, 2}, {0, 1}), y), 16.118, 1e-3);
    EXPECT_NEAR(bce_loss(Tensor::from({2, 2}, {0.5, 0.5, 0.25, 0.75}), Tensor::from({2, 2}, {1, 0, 0, 1})),
                (std::log(2.0) - std::log(0.75)) / 2.0, 1e-12);
}

TEST(Bce, Errors) {
    EXPECT_THROW(bce_loss(Tensor::from({1, 2}, {NAN, 0.5}), Tensor::from({1, 2}, {1, 0})), ArgumentError);
    EXPECT_THROW(bce_loss(Tensor::from({1, 2}, {0.5, 0.5}), Tensor::from({1, 2}, {NAN, 0})), ArgumentError);
    EXPECT_THROW(bce_loss(Tensor::from({1, 2}, {0.5, 0.5}), Tensor::from({2, 1}, {1, 0})), DimensionError);
}

TEST(Bce, NonNegative) {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 100; ++i) {
        const auto p = ops::softmax(oracle::random_tensor({3, 2}, rng, -20, 20));
        Tensor y({3, 2});
        for (std::size_t n = 0; n < 3; ++n) y[n * 2 + rng() % 2] = 1.0;
        EXPECT_GE(bce_loss(p, y), 0.0);
    }
}

TEST(Adam, FirstStepClosedForm) {
    ParameterStore params;
    params.set("w", Tensor({1}, 0.0));
    AdamState state(AdamConfig{}, std::vector<std::string>{"w"}, params);
    adam_step(state, params, {{"w", Tensor({1}, 1.0)}});
    EXPECT_NEAR(params.at("w")[0], -1e-3 / (1.0 + 1e-8), 1e-15);
    EXPECT_NEAR(params.at("w")[0], -0.000999999, 1e-9);
    EXPECT_EQ(state.step_count(), 1u);
}

TEST(Adam, ZeroGradientAndZeroLearningRate) {
    ParameterStore params;
    params.set("w", Tensor::from({3}, {0.5, -1, 2}));
    const auto before = params;
    AdamState state(AdamConfig{}, std::vector<std::string>{"w"}, params);
    for (int i = 0; i < 5; ++i) adam_step(state, params, {{"w", Tensor({3})}});
    EXPECT_EQ(params, before);
    EXPECT_EQ(state.step_count(), 5u);

    AdamConfig frozen;
    frozen.lr = 0.0;
    AdamState still(frozen, std::vector<std::string>{"w"}, params);
    adam_step(still, params, {{"w", Tensor::from({3}, {1, -3, 0.1})}});
    EXPECT_EQ(params, before);
    for (double v : still.moments().at("w").v.data()) EXPECT_GE(v, 0.0);
}

TEST(Adam, NameMismatchIsNamedError) {
    ParameterStore params;
    params.set("a", Tensor({1}));
    params.set("b", Tensor({1}));
    AdamState state(AdamConfig{}, std::vector<std::string>{"a", "b"}, params);
    try {
        state.step(params, {{"a", Tensor({1})}});
        FAIL();
    } catch (const ArgumentError& e) {
        EXPECT_NE(std::string(e.what()).find("'b'"), std::string::npos);
    }
    try {
        state.step(params, {{"a", Tensor({1})}, {"b", Tensor({1})}, {"c", Tensor({1})}});
        FAIL();
    } catch (const ArgumentError& e) {
        EXPECT_NE(std::string(e.what()).find("'c'"), std::string::npos);
    }
    EXPECT_EQ(state.step_count(), 0u);
}

TEST(Train, ZeroEpochsIsNoOp) {
    const auto g = assemble_model(ModelVariant::parse("micro"));
    const auto params = initialize_parameters(g, 1);
    const auto data = synthetic_split(10, 1);
    TrainConfig config;
    config.epochs = 0;
    const auto result = train(g, params, data.train, data.test, config);
    EXPECT_EQ(result.params, params);
    EXPECT_TRUE(result.history.empty());
}

TEST(Train, EmptyTrainSplitRejected) {
    const auto g = assemble_model(ModelVariant::parse("micro"));
    EXPECT_THROW(train(g, initialize_parameters(g, 1), {}, {}, TrainConfig{}), ArgumentError);
}

TEST(Train, WrongSampleShapeRejected) {
    const auto g = assemble_model(ModelVariant::parse("micro"));
    const auto samples = make_separable_samples(4, 16, 1);
    EXPECT_THROW(train(g, initialize_parameters(g, 1), samples, {}, TrainConfig{}), DimensionError);
}

TEST(Train, LearnsSeparableSetAndKeepsBackboneFrozen) {
    const auto g = assemble_model(ModelVariant::parse("micro"));
    const auto params = initialize_parameters(g, 42);
    const auto data = synthetic_split(200, 7);
    const auto result = train(g, params, data.train, data.test, TrainConfig{});
    ASSERT_EQ(result.history.size(), 25u);
    EXPECT_GE(result.history.back().train_acc, 0.95);
    double early = 0, late = 0;
    for (std::size_t e = 0; e < 5; ++e) {
        early += result.history[e].train_loss;
        late += result.history[20 + e].train_loss;
    }
    EXPECT_LT(late, early);
    for (const auto& r : result.history) {
        EXPECT_TRUE(std::isfinite(r.train_loss));
        ASSERT_TRUE(r.val_acc.has_value());
    }

    std::size_t correct = 0;
    const auto preds = predict_samples(g, result.params, data.test);
    for (std::size_t i = 0; i < preds.size(); ++i) correct += preds[i].label == data.test[i].label;
    EXPECT_GE(static_cast<double>(correct) / static_cast<double>(preds.size()), 0.95);

    for (const auto& layer : g.layers())
        for (const auto& p : layer.params) {
            if (layer.frozen)
                EXPECT_EQ(result.params.at(p.name), params.at(p.name)) << p.name;
            else
                EXPECT_NE(result.params.at(p.name), params.at(p.name)) << p.name;
        }
}

TEST(Train, BitwiseDeterministic) {
    const auto g = assemble_model(ModelVariant::parse("micro"));
    const auto data = synthetic_split(40, 3);
    TrainConfig config;
    config.epochs = 3;
    config.batch_size = 8;
    const auto a = train(g, initialize_parameters(g, 5), data.train, data.test, config);
    const auto b = train(g, initialize_parameters(g, 5), data.train, data.test, config);
    EXPECT_EQ(serialize_weights(a.params, g), serialize_weights(b.params, g));
    EXPECT_EQ(history_to_json(a.history, config, 0.5), history_to_json(b.history, config, 0.5));
    config.seed = 6;
    const auto c = train(g, initialize_parameters(g, 5), data.train, data.test, config);
    EXPECT_NE(serialize_weights(a.params, g), serialize_weights(c.params, g));
}

TEST(Train, AugmentedRunIsDeterministicToo) {
    const auto g = assemble_model(ModelVariant::parse("micro"));
    const auto samples = make_separable_samples(20, 32, 4);
    TrainConfig config;
    config.epochs = 2;
    config.augmentation = AugmentPolicy{};
    const auto a = train(g, initialize_parameters(g, 5), samples, {}, config);
    const auto b = train(g, initialize_parameters(g, 5), samples, {}, config);
    EXPECT_EQ(a.params, b.params);
    EXPECT_FALSE(a.history[0].val_loss.has_value());
}

TEST(Train, ConvHeadTrains) {
    const auto g = assemble_model(ModelVariant::parse("micro-alg1conv"));
    const auto data = synthetic_split(40, 9);
    TrainConfig config;
    config.epochs = 2;
    const auto r = train(g, initialize_parameters(g, 2), data.train, data.test, config);
    EXPECT_EQ(r.history.size(), 2u);
}

TEST(History, JsonRoundTrip) {
    EpochHistory h{{1, 0.7, 0.5, 0.69, 0.55}, {2, 0.1 + 0.2, 0.9, std::nullopt, std::nullopt}};
    TrainConfig config;
    const auto text = history_to_json(h, config, 0.5, ChannelMean{0.1, 0.2, 0.3});
    const auto back = history_from_json(text);
    ASSERT_EQ(back.size(), 2u);
    EXPECT_EQ(back[1].train_loss, 0.1 + 0.2);
    EXPECT_EQ(back[0].val_acc, 0.55);
    EXPECT_FALSE(back[1].val_loss.has_value());
    EXPECT_NE(text.find("\"batch_size\": 16"), std::string::npos);
    EXPECT_NE(text.find("\"channel_mean\""), std::string::npos);
    EXPECT_THROW(history_from_json("{\"epoch\": 1}"), FormatError);
}

TEST(Predict, SoftmaxContractAndDuplicates) {
    const auto g = assemble_model(ModelVariant::parse("micro"));
    const auto params = initialize_parameters(g, 8);
    std::mt19937_64 rng(3);
    Tensor batch = oracle::random_tensor({4, 3, 32, 32}, rng, 0, 1);
    std::copy_n(batch.data().begin(), 3 * 32 * 32, batch.data().begin() + 3 * 3 * 32 * 32);
    const auto preds = predict(g, params, batch);
    ASSERT_EQ(preds.size(), 4u);
    for (const auto& p : preds) {
        EXPECT_NEAR(p.probabilities[0] + p.probabilities[1], 1.0, 1e-6);
        EXPECT_EQ(p.label, p.probabilities[0] >= p.probabilities[1] ? Label::Covid : Label::Normal);
        EXPECT_EQ(p.confidence, std::max(p.probabilities[0], p.probabilities[1]));
    }
    EXPECT_EQ(preds[0].probabilities, preds[3].probabilities);
    EXPECT_THROW(predict(g, params, Tensor({1, 3, 16, 16})), DimensionError);
    EXPECT_THROW(predict(g, params, Tensor({3, 32, 32})), DimensionError);
}
