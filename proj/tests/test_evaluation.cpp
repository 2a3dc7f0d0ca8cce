#include <gtest/gtest.h>

#include <cmath>

#include "covilearn/architecture.hpp"
#include "covilearn/errors.hpp"
#include "covilearn/evaluation.hpp"
#include "support/oracles.hpp"

using namespace covilearn;

namespace {

std::vector<Label> labels(std::initializer_list<int> covid_flags) {
    std::vector<Label> out;
    for (int f : covid_flags) out.push_back(f ? Label::Covid : Label::Normal);
    return out;
}

std::vector<Label> random_labels(std::size_t n, std::mt19937_64& rng) {
    std::vector<Label> out(n);
    for (auto& l : out) l = rng() % 2 ? Label::Covid : Label::Normal;
    return out;
}

}  // namespace

TEST(Confusion, Examples) {
    const std::vector<Label> covid(10, Label::Covid);
    EXPECT_EQ(confusion(covid, covid), (ConfusionMatrix{10, 0, 0, 0}));
    const auto truth = labels({1, 1, 1, 1, 1, 0, 0, 0, 0, 0});
    const auto wrong = labels({0, 0, 0, 0, 0, 1, 1, 1, 1, 1});
    EXPECT_EQ(confusion(wrong, truth), (ConfusionMatrix{0, 0, 5, 5}));
    EXPECT_THROW(confusion(covid, labels({1, 0, 1})), ArgumentError);
    EXPECT_THROW(confusion({}, {}), ArgumentError);
}

TEST(Confusion, TableScenarioMatchesBruteForce) {
    std::vector<Label> truth, pred;
    for (int i = 0; i < 48; ++i) truth.push_back(Label::Covid), pred.push_back(Label::Covid);
    for (int i = 0; i < 49; ++i) truth.push_back(Label::Normal), pred.push_back(Label::Normal);
    truth.push_back(Label::Normal), pred.push_back(Label::Covid);
    const auto cm = confusion(pred, truth);
    const auto brute = oracle::brute_force_metrics(pred, truth);
    EXPECT_EQ(cm, (ConfusionMatrix{brute.tp, brute.tn, brute.fp, brute.fn}));
    EXPECT_EQ(cm, (ConfusionMatrix{48, 49, 1, 0}));
}

TEST(Metrics, TableRow) {
    const auto m = compute_metrics({48, 49, 1, 0});
    EXPECT_EQ(*m.accuracy, 97.0 / 98.0);
    EXPECT_NEAR(*m.accuracy, 0.9898, 5e-5);
    EXPECT_EQ(*m.sensitivity, 1.0);
    EXPECT_NEAR(*m.specificity, 0.98, 1e-15);
}

TEST(Metrics, PerfectAndUndefined) {
    const auto perfect = compute_metrics({1, 1, 0, 0});
    EXPECT_EQ(*perfect.accuracy, 1.0);
    EXPECT_EQ(*perfect.sensitivity, 1.0);
    EXPECT_EQ(*perfect.specificity, 1.0);
    const auto no_pos = compute_metrics({0, 3, 1, 0});
    EXPECT_FALSE(no_pos.sensitivity.has_value());
    EXPECT_EQ(*no_pos.specificity, 0.75);
    const auto empty = compute_metrics({});
    EXPECT_FALSE(empty.accuracy.has_value());
}

TEST(Metrics, RandomScenariosMatchBruteForce) {
    std::mt19937_64 rng(1000);
    for (int s = 0; s < 1000; ++s) {
        const std::size_t n = 1 + rng() % 200;
        const auto truth = random_labels(n, rng), pred = random_labels(n, rng);
        const auto cm = confusion(pred, truth);
        const auto m = compute_metrics(cm);
        const auto b = oracle::brute_force_metrics(pred, truth);
        ASSERT_EQ(cm, (ConfusionMatrix{b.tp, b.tn, b.fp, b.fn}));
        ASSERT_NEAR(*m.accuracy, b.accuracy, 1e-12);
        ASSERT_EQ(m.sensitivity.has_value(), !std::isnan(b.sensitivity));
        if (m.sensitivity) ASSERT_NEAR(*m.sensitivity, b.sensitivity, 1e-12);
        ASSERT_EQ(m.specificity.has_value(), !std::isnan(b.specificity));
        if (m.specificity) ASSERT_NEAR(*m.specificity, b.specificity, 1e-12);
        ASSERT_EQ(*m.accuracy, static_cast<double>(cm.tp + cm.tn) / static_cast<double>(cm.total()));
    }
}

TEST(Metrics, InvariantUnderOneSidedAdditions) {
    const ConfusionMatrix base{7, 11, 3, 2};
    ConfusionMatrix more_tn = base;
    more_tn.tn += 40;
    EXPECT_EQ(compute_metrics(base).sensitivity, compute_metrics(more_tn).sensitivity);
    ConfusionMatrix more_tp = base;
    more_tp.tp += 40;
    EXPECT_EQ(compute_metrics(base).specificity, compute_metrics(more_tp).specificity);
}

TEST(Roc, Examples) {
    const std::vector<double> perfect{0.9, 0.8, 0.1, 0.2};
    EXPECT_EQ(roc_auc(perfect, labels({1, 1, 0, 0})).auc, 1.0);
    const std::vector<double> tie{0.8, 0.8};
    EXPECT_EQ(roc_auc(tie, labels({1, 0})).auc, 0.5);
    EXPECT_THROW(roc_auc(perfect, labels({1, 1, 1, 1})), ArgumentError);
    EXPECT_THROW(roc_auc(tie, labels({1})), ArgumentError);
}

TEST(Roc, MatchesMannWhitneyOnRandomSets) {
    std::mt19937_64 rng(200);
    std::uniform_real_distribution<double> u(0, 1);
    for (int s = 0; s < 200; ++s) {
        const std::size_t n = 2 + rng() % 49;
        auto truth = random_labels(n, rng);
        truth[0] = Label::Covid;
        truth[1] = Label::Normal;
        std::vector<double> scores(n);
        const bool coarse = s % 2 == 0;
        for (auto& v : scores) v = coarse ? std::round(u(rng) * 5) / 5 : u(rng);
        const auto roc = roc_auc(scores, truth);
        ASSERT_NEAR(roc.auc, oracle::mann_whitney_auc(scores, truth), 1e-9);
        ASSERT_EQ(roc.points.front(), (RocPoint{0, 0}));
        ASSERT_EQ(roc.points.back(), (RocPoint{1, 1}));
        for (std::size_t i = 1; i < roc.points.size(); ++i) {
            ASSERT_GE(roc.points[i].fpr, roc.points[i - 1].fpr);
            ASSERT_GE(roc.points[i].tpr, roc.points[i - 1].tpr);
        }
        std::vector<double> flipped;
        for (double v : scores) flipped.push_back(1.0 - v);
        if (!coarse) ASSERT_NEAR(roc_auc(flipped, truth).auc, 1.0 - roc.auc, 1e-12);
    }
}

TEST(Report, JsonRecomputesFromMatrix) {
    MetricsReport r;
    r.confusion = {48, 49, 1, 0};
    r.metrics = compute_metrics(r.confusion);
    const std::vector<double> scores{0.9, 0.7, 0.4, 0.2};
    r.roc = roc_auc(scores, labels({1, 0, 1, 0}));
    r.provenance.variant = "densenet121-gapdense";
    r.provenance.seed = 42;
    const auto back = MetricsReport::from_json(r.to_json());
    EXPECT_EQ(back.confusion, r.confusion);
    EXPECT_EQ(*back.metrics.accuracy,
              static_cast<double>(back.confusion.tp + back.confusion.tn) / static_cast<double>(back.confusion.total()));
    EXPECT_EQ(back.metrics.sensitivity, compute_metrics(back.confusion).sensitivity);
    EXPECT_EQ(back.metrics.specificity, compute_metrics(back.confusion).specificity);
    EXPECT_EQ(back.roc.auc, r.roc.auc);
    EXPECT_EQ(back.roc.points, r.roc.points);
    EXPECT_EQ(back.provenance.seed, std::optional<std::uint64_t>(42));
    EXPECT_NE(r.summary().find("accuracy    0.9898"), std::string::npos);
    EXPECT_EQ(r.roc_csv().substr(0, 8), "fpr,tpr\n");
}

TEST(Report, UndefinedMetricIsNullInJson) {
    MetricsReport r;
    r.confusion = {0, 4, 0, 0};
    r.metrics = compute_metrics(r.confusion);
    const auto text = r.to_json();
    EXPECT_NE(text.find("\"sensitivity\": null"), std::string::npos) << text;
    EXPECT_FALSE(MetricsReport::from_json(text).metrics.sensitivity.has_value());
}

TEST(Evaluate, RandomWeightsOnRandomLabelsIsCoinFlip) {
    const auto g = assemble_model(ModelVariant::parse("micro"));
    const auto params = initialize_parameters(g, 77);
    std::mt19937_64 rng(5);
    std::vector<Sample> samples;
    for (std::size_t i = 0; i < 1000; ++i)
        samples.push_back(make_sample(oracle::random_tensor({3, 32, 32}, rng, 0, 1),
                                      i % 2 == 0 ? Label::Covid : Label::Normal));
    std::shuffle(samples.begin(), samples.end(), rng);
    const auto report = evaluate(g, params, samples);
    EXPECT_NEAR(*report.metrics.accuracy, 0.5, 0.05);
    EXPECT_EQ(report.confusion.total(), 1000u);
    EXPECT_EQ(report.provenance.input_size, 32u);
    EXPECT_THROW(evaluate(g, params, {}), ArgumentError);
}
