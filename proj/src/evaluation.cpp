#include "covilearn/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "covilearn/errors.hpp"
#include "covilearn/training.hpp"
#include "json.hpp"

namespace covilearn {

ConfusionMatrix confusion(std::span<const Label> predictions, std::span<const Label> truths) {
    if (predictions.size() != truths.size())
        throw ArgumentError("confusion: " + std::to_string(predictions.size()) + " predictions vs " +
                            std::to_string(truths.size()) + " truths");
    if (truths.empty()) throw ArgumentError("confusion: no samples");
    ConfusionMatrix cm;
    for (std::size_t i = 0; i < truths.size(); ++i) {
        const bool pred_pos = predictions[i] == Label::Covid;
        const bool true_pos = truths[i] == Label::Covid;
        if (pred_pos && true_pos)
            ++cm.tp;
        else if (!pred_pos && !true_pos)
            ++cm.tn;
        else if (pred_pos)
            ++cm.fp;
        else
            ++cm.fn;
    }
    return cm;
}

namespace {

std::optional<double> ratio(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

Metrics compute_metrics(const ConfusionMatrix& cm) {
    return {ratio(cm.tp + cm.tn, cm.total()), ratio(cm.tp, cm.tp + cm.fn), ratio(cm.tn, cm.tn + cm.fp)};
}

RocCurve roc_auc(std::span<const double> scores, std::span<const Label> truths) {
    if (scores.size() != truths.size())
        throw ArgumentError("roc_auc: " + std::to_string(scores.size()) + " scores vs " +
                            std::to_string(truths.size()) + " truths");
    for (double s : scores)
        if (std::isnan(s)) throw ArgumentError("roc_auc: NaN score");
    const auto positives = static_cast<std::size_t>(std::count(truths.begin(), truths.end(), Label::Covid));
    const std::size_t negatives = truths.size() - positives;
    if (positives == 0 || negatives == 0) throw ArgumentError("roc_auc: truths contain a single class");

    std::vector<std::size_t> order(scores.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

    RocCurve roc;
    roc.points.push_back({0.0, 0.0});
    std::size_t tp = 0, fp = 0;
    // Twice the area in units of one positive-negative pair.
    std::uint64_t doubled_area = 0;
    for (std::size_t i = 0; i < order.size();) {
        const double threshold = scores[order[i]];
        const std::size_t tp_before = tp, fp_before = fp;
        for (; i < order.size() && scores[order[i]] == threshold; ++i) {
            if (truths[order[i]] == Label::Covid)
                ++tp;
            else
                ++fp;
        }
        doubled_area += static_cast<std::uint64_t>(fp - fp_before) * (tp + tp_before);
        roc.points.push_back({static_cast<double>(fp) / static_cast<double>(negatives),
                              static_cast<double>(tp) / static_cast<double>(positives)});
    }
    roc.auc = static_cast<double>(doubled_area) / (2.0 * static_cast<double>(positives) * static_cast<double>(negatives));
    return roc;
}

namespace {

nlohmann::json optional_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(); }

std::optional<double> optional_from(const nlohmann::json& j) {
    if (j.is_null()) return std::nullopt;
    return j.get<double>();
}

std::string fixed4(const std::optional<double>& v) {
    if (!v) return "undefined";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", *v);
    return buf;
}

}  // namespace

std::string MetricsReport::to_json() const {
    nlohmann::json roc_points = nlohmann::json::array();
    for (const auto& p : roc.points) roc_points.push_back({p.fpr, p.tpr});
    nlohmann::json prov = {{"variant", provenance.variant},
                           {"head", provenance.head},
                           {"seed", provenance.seed ? nlohmann::json(*provenance.seed) : nlohmann::json()},
                           {"subtract_mean", provenance.subtract_mean},
                           {"augmentation", provenance.augmentation},
                           {"input_size", provenance.input_size},
                           {"weights_digest", provenance.weights_digest}};
    nlohmann::json j = {
        {"confusion", {{"tp", confusion.tp}, {"tn", confusion.tn}, {"fp", confusion.fp}, {"fn", confusion.fn}}},
        {"accuracy", optional_json(metrics.accuracy)},
        {"sensitivity", optional_json(metrics.sensitivity)},
        {"specificity", optional_json(metrics.specificity)},
        {"auc", roc.points.empty() ? nlohmann::json() : nlohmann::json(roc.auc)},
        {"roc", roc_points},
        {"provenance", prov}};
    return j.dump(2);
}

MetricsReport MetricsReport::from_json(const std::string& text) {
    MetricsReport r;
    try {
        const auto j = nlohmann::json::parse(text);
        const auto& c = j.at("confusion");
        r.confusion = {c.at("tp").get<std::size_t>(), c.at("tn").get<std::size_t>(), c.at("fp").get<std::size_t>(),
                       c.at("fn").get<std::size_t>()};
        r.metrics = {optional_from(j.at("accuracy")), optional_from(j.at("sensitivity")),
                     optional_from(j.at("specificity"))};
        if (!j.at("auc").is_null()) r.roc.auc = j.at("auc").get<double>();
        for (const auto& p : j.at("roc")) r.roc.points.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        const auto& p = j.at("provenance");
        r.provenance.variant = p.value("variant", "");
        r.provenance.head = p.value("head", "");
        if (p.contains("seed") && !p["seed"].is_null()) r.provenance.seed = p["seed"].get<std::uint64_t>();
        r.provenance.subtract_mean = p.value("subtract_mean", false);
        r.provenance.augmentation = p.value("augmentation", false);
        r.provenance.input_size = p.value("input_size", std::size_t{0});
        r.provenance.weights_digest = p.value("weights_digest", "");
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed metrics report: ") + e.what());
    }
    return r;
}

std::string MetricsReport::roc_csv() const {
    std::ostringstream out;
    out.precision(17);
    out << "fpr,tpr\n";
    for (const auto& p : roc.points) out << p.fpr << ',' << p.tpr << '\n';
    return out.str();
}

std::string MetricsReport::summary() const {
    std::ostringstream out;
    out << "TP=" << confusion.tp << " FN=" << confusion.fn << " TN=" << confusion.tn << " FP=" << confusion.fp << '\n';
    out << "accuracy    " << fixed4(metrics.accuracy) << '\n';
    out << "sensitivity " << fixed4(metrics.sensitivity) << '\n';
    out << "specificity " << fixed4(metrics.specificity) << '\n';
    out << "auc         " << (roc.points.empty() ? std::string("undefined") : fixed4(roc.auc)) << '\n';
    return out.str();
}

MetricsReport evaluate(const ArchitectureGraph& graph, const ParameterStore& params, std::span<const Sample> samples,
                       Provenance provenance) {
    if (samples.empty()) throw ArgumentError("evaluate: test split is empty");
    const auto preds = predict_samples(graph, params, samples);
    std::vector<Label> predicted, truths;
    std::vector<double> scores;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        predicted.push_back(preds[i].label);
        truths.push_back(samples[i].label);
        scores.push_back(preds[i].probabilities[class_index(Label::Covid)]);
    }
    MetricsReport report;
    report.confusion = confusion(predicted, truths);
    report.metrics = compute_metrics(report.confusion);
    const bool both_classes = std::count(truths.begin(), truths.end(), Label::Covid) > 0 &&
                              std::count(truths.begin(), truths.end(), Label::Normal) > 0;
    if (both_classes) report.roc = roc_auc(scores, truths);
    if (provenance.input_size == 0) provenance.input_size = graph.input_shape().back();
    report.provenance = std::move(provenance);
    return report;
}

}  // namespace covilearn
