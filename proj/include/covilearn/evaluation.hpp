#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "covilearn/architecture.hpp"
#include "covilearn/dataset.hpp"
#include "covilearn/parameters.hpp"

namespace covilearn {

// Covid is the positive class.
struct ConfusionMatrix {
    std::size_t tp = 0;
    std::size_t tn = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;

    std::size_t total() const noexcept { return tp + tn + fp + fn; }
    friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

ConfusionMatrix confusion(std::span<const Label> predictions, std::span<const Label> truths);

// nullopt marks a zero denominator.
struct Metrics {
    std::optional<double> accuracy;
    std::optional<double> sensitivity;
    std::optional<double> specificity;
};

Metrics compute_metrics(const ConfusionMatrix& cm);

struct RocPoint {
    double fpr = 0.0;
    double tpr = 0.0;
    friend bool operator==(const RocPoint&, const RocPoint&) = default;
};

struct RocCurve {
    std::vector<RocPoint> points;  // (0,0) first, (1,1) last
    double auc = 0.0;
};

// `scores` are positive-class (covid) probabilities.
RocCurve roc_auc(std::span<const double> scores, std::span<const Label> truths);

struct Provenance {
    std::string variant;
    std::string head;
    std::optional<std::uint64_t> seed;
    bool subtract_mean = false;
    bool augmentation = false;
    std::size_t input_size = 0;
    std::string weights_digest;
};

struct MetricsReport {
    ConfusionMatrix confusion;
    Metrics metrics;
    RocCurve roc;
    Provenance provenance;

    std::string to_json() const;
    static MetricsReport from_json(const std::string& text);
    std::string roc_csv() const;  // "fpr,tpr" rows
    std::string summary() const;  // 4-decimal text table
};

// Argmax predictions over `samples`, metrics, ROC from the covid probability.
MetricsReport evaluate(const ArchitectureGraph& graph, const ParameterStore& params, std::span<const Sample> samples,
                       Provenance provenance = {});

}  // namespace covilearn
