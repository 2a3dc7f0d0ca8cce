#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "covilearn/architecture.hpp"
#include "covilearn/augment.hpp"
#include "covilearn/autodiff.hpp"
#include "covilearn/dataset.hpp"
#include "covilearn/parameters.hpp"
#include "covilearn/preprocess.hpp"

namespace covilearn {

inline constexpr double kProbabilityFloor = 1e-7;

// Mean over the batch of -sum_k y_k log(clamp(p_k, 1e-7, 1)).
double bce_loss(const Tensor& predicted, const Tensor& target);
Var bce_loss(Var predicted, const Tensor& target);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

class AdamState {
public:
    struct Moments {
        Tensor m, v;
    };

    // Moments for every trainable parameter of `graph`, shaped from `params`.
    AdamState(AdamConfig config, const ArchitectureGraph& graph, const ParameterStore& params);
    // Moments for an explicit parameter list.
    AdamState(AdamConfig config, const std::vector<std::string>& names, const ParameterStore& params);

    const AdamConfig& config() const noexcept { return config_; }
    std::uint64_t step_count() const noexcept { return t_; }
    const std::map<std::string, Moments, std::less<>>& moments() const noexcept { return moments_; }

    // theta -= lr * m_hat / (sqrt(v_hat) + eps) with bias-corrected moments.
    // `grads` must name exactly the tracked parameters.
    void step(ParameterStore& params, const GradientMap& grads);

private:
    AdamConfig config_;
    std::uint64_t t_ = 0;
    std::map<std::string, Moments, std::less<>> moments_;
};

inline void adam_step(AdamState& state, ParameterStore& params, const GradientMap& grads) {
    state.step(params, grads);
}

struct TrainConfig {
    std::size_t epochs = 25;
    std::size_t batch_size = 16;
    AdamConfig adam;
    std::uint64_t seed = 42;
    std::optional<AugmentPolicy> augmentation;
};

struct EpochRecord {
    std::size_t epoch = 0;  // 1-based
    double train_loss = 0.0;
    double train_acc = 0.0;
    std::optional<double> val_loss;  // absent without a validation split
    std::optional<double> val_acc;
};

using EpochHistory = std::vector<EpochRecord>;

struct TrainResult {
    ParameterStore params;
    EpochHistory history;
};

// Trains the non-frozen layers. When the frozen prefix ends in a feature map
// that the head alone consumes, those features are computed once per sample
// (unless augmentation is on) and the tape covers only the head.
TrainResult train(const ArchitectureGraph& graph, ParameterStore params, std::span<const Sample> train_set,
                  std::span<const Sample> validation_set, const TrainConfig& config);

// JSON array of {epoch, train_loss, train_acc, val_loss, val_acc, config};
// `config` repeats the hyperparameters on every record.
std::string history_to_json(const EpochHistory& history, const TrainConfig& config, double dropout_rate,
                            const std::optional<ChannelMean>& channel_mean = std::nullopt);
EpochHistory history_from_json(const std::string& text);

struct Prediction {
    Tensor probabilities;  // (2)
    Label label = Label::Normal;
    double confidence = 0.0;
};

// `images` is (N, C, H, W) matching the graph input. Dropout runs in
// inference mode.
std::vector<Prediction> predict(const ArchitectureGraph& graph, const ParameterStore& params, const Tensor& images);
std::vector<Prediction> predict_samples(const ArchitectureGraph& graph, const ParameterStore& params,
                                        std::span<const Sample> samples, std::size_t batch_size = 32);

}  // namespace covilearn
