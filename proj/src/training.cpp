#include "covilearn/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "covilearn/errors.hpp"
#include "covilearn/executor.hpp"
#include "json.hpp"

namespace covilearn {

namespace {

void check_loss_inputs(const Tensor& predicted, const Tensor& target) {
    require_rank(predicted, 2, "bce_loss predictions");
    if (predicted.shape() != target.shape())
        throw DimensionError("bce_loss: predictions " + shape_to_string(predicted.shape()) + " vs targets " +
                             shape_to_string(target.shape()));
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (std::isnan(predicted[i]) || std::isnan(target[i])) throw ArgumentError("bce_loss: NaN input");
    const std::size_t N = predicted.dim(0), K = predicted.dim(1);
    for (std::size_t n = 0; n < N; ++n) {
        double row = 0.0;
        for (std::size_t k = 0; k < K; ++k) row += predicted[n * K + k];
        if (std::abs(row - 1.0) > 1e-6)
            throw ArgumentError("bce_loss: prediction row " + std::to_string(n) + " sums to " + std::to_string(row));
    }
}

double clamp_probability(double p) { return std::clamp(p, kProbabilityFloor, 1.0); }

}  // namespace

double bce_loss(const Tensor& predicted, const Tensor& target) {
    check_loss_inputs(predicted, target);
    const std::size_t N = predicted.dim(0);
    double total = 0.0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (target[i] != 0.0) total -= target[i] * std::log(clamp_probability(predicted[i]));
    return total / static_cast<double>(N);
}

Var bce_loss(Var predicted, const Tensor& target) {
    const Tensor& p = predicted.value();
    const double loss = bce_loss(p, target);
    const double inv_n = 1.0 / static_cast<double>(p.dim(0));
    return predicted.tape->record(
        Tensor::scalar(loss), {predicted.id},
        [p, target, inv_n](const Tensor& g, std::span<Tensor* const> s) {
            if (!s[0]) return;
            for (std::size_t i = 0; i < p.size(); ++i) {
                // d/dp of -y log(clamp(p)); zero where the clamp is active.
                if (target[i] != 0.0 && p[i] > kProbabilityFloor) (*s[0])[i] -= g[0] * inv_n * target[i] / p[i];
            }
        });
}

// ---------------------------------------------------------------------------
// Adam

AdamState::AdamState(AdamConfig config, const ArchitectureGraph& graph, const ParameterStore& params)
    : AdamState(config, trainable_parameter_names(graph), params) {}

AdamState::AdamState(AdamConfig config, const std::vector<std::string>& names, const ParameterStore& params)
    : config_(config) {
    if (!(config.lr >= 0.0) || !(config.beta1 >= 0.0 && config.beta1 < 1.0) ||
        !(config.beta2 >= 0.0 && config.beta2 < 1.0) || !(config.eps > 0.0))
        throw ArgumentError("adam: hyperparameters out of range");
    for (const auto& name : names) {
        const Shape& s = params.at(name).shape();
        moments_.emplace(name, Moments{Tensor(s), Tensor(s)});
    }
}

void AdamState::step(ParameterStore& params, const GradientMap& grads) {
    for (const auto& [name, _] : grads)
        if (!moments_.contains(name)) throw ArgumentError("adam: gradient for untracked parameter '" + name + "'");
    for (const auto& [name, _] : moments_)
        if (!grads.contains(name)) throw ArgumentError("adam: missing gradient for parameter '" + name + "'");
    for (const auto& [name, g] : grads) {
        const Moments& mom = moments_.at(name);
        if (g.shape() != mom.m.shape() || params.at(name).shape() != mom.m.shape())
            throw DimensionError("adam: gradient for '" + name + "' has shape " + shape_to_string(g.shape()) +
                                 ", parameter has " + shape_to_string(params.at(name).shape()));
        require_finite(g, ("adam: gradient for '" + name + "'").c_str());
    }

    ++t_;
    const double b1 = config_.beta1, b2 = config_.beta2;
    const double correction1 = 1.0 - std::pow(b1, static_cast<double>(t_));
    const double correction2 = 1.0 - std::pow(b2, static_cast<double>(t_));
    for (auto& [name, mom] : moments_) {
        const Tensor& g = grads.find(name)->second;
        Tensor& theta = params.at(name);
        for (std::size_t i = 0; i < g.size(); ++i) {
            mom.m[i] = b1 * mom.m[i] + (1.0 - b1) * g[i];
            mom.v[i] = b2 * mom.v[i] + (1.0 - b2) * g[i] * g[i];
            const double m_hat = mom.m[i] / correction1;
            const double v_hat = mom.v[i] / correction2;
            theta[i] -= config_.lr * m_hat / (std::sqrt(v_hat) + config_.eps);
        }
    }
}

// ---------------------------------------------------------------------------
// Training loop

namespace {

// The frozen layer whose output the trainable part consumes exclusively,
// when such a clean cut exists.
std::optional<std::string> feature_cut(const ArchitectureGraph& graph) {
    const auto& cut = graph.backbone_output();
    if (!cut) return std::nullopt;
    const std::size_t idx = graph.index_of(*cut);
    const auto& layers = graph.layers();
    for (std::size_t i = 0; i <= idx; ++i)
        if (!layers[i].frozen && !layers[i].params.empty()) return std::nullopt;
    for (std::size_t i = idx + 1; i < layers.size(); ++i)
        for (const auto& in : layers[i].inputs)
            if (in != *cut && graph.index_of(in) <= idx) return std::nullopt;
    return cut;
}

Tensor stack_rows(const Tensor& source, std::span<const std::size_t> rows) {
    Shape shape = source.shape();
    const std::size_t block = source.size() / shape[0];
    shape[0] = rows.size();
    Tensor out(shape);
    for (std::size_t i = 0; i < rows.size(); ++i)
        std::copy_n(source.data().begin() + static_cast<std::ptrdiff_t>(rows[i] * block), block,
                    out.data().begin() + static_cast<std::ptrdiff_t>(i * block));
    return out;
}

Tensor stack_targets(std::span<const Sample> samples, std::span<const std::size_t> rows) {
    Tensor t(Shape{rows.size(), kNumClasses});
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (std::size_t k = 0; k < kNumClasses; ++k) t[i * kNumClasses + k] = samples[rows[i]].target[k];
    return t;
}

std::size_t count_correct(const Tensor& probs, std::span<const Sample> samples, std::span<const std::size_t> rows) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const std::size_t guess = probs[i * 2] >= probs[i * 2 + 1] ? 0 : 1;
        if (guess == class_index(samples[rows[i]].label)) ++correct;
    }
    return correct;
}

Tensor extract_features(const ArchitectureGraph& graph, const ParameterStore& params, std::span<const Sample> samples,
                        const std::string& cut, std::size_t chunk) {
    std::vector<Tensor> parts;
    std::vector<std::size_t> rows;
    for (std::size_t start = 0; start < samples.size(); start += chunk) {
        rows.clear();
        for (std::size_t i = start; i < std::min(samples.size(), start + chunk); ++i) rows.push_back(i);
        parts.push_back(forward(graph, params, stack_pixels(samples, rows), {}, cut));
    }
    Shape shape = parts.front().shape();
    shape[0] = samples.size();
    Tensor all(shape);
    auto out = all.data().begin();
    for (const auto& p : parts) out = std::copy(p.data().begin(), p.data().end(), out);
    return all;
}

void check_sample_shapes(const ArchitectureGraph& graph, std::span<const Sample> samples, const char* which) {
    for (const auto& s : samples)
        if (s.pixels.shape() != graph.input_shape())
            throw DimensionError(std::string(which) + " sample has shape " + shape_to_string(s.pixels.shape()) +
                                 ", model " + graph.tag() + " expects " + shape_to_string(graph.input_shape()));
}

}  // namespace

TrainResult train(const ArchitectureGraph& graph, ParameterStore params, std::span<const Sample> train_set,
                  std::span<const Sample> validation_set, const TrainConfig& config) {
    require_matches(params, graph);
    if (config.epochs == 0) return {std::move(params), {}};
    if (train_set.empty()) throw ArgumentError("train: training split is empty");
    if (config.batch_size == 0) throw ArgumentError("train: batch size must be positive");
    check_sample_shapes(graph, train_set, "training");
    check_sample_shapes(graph, validation_set, "validation");

    const auto cut = feature_cut(graph);
    const std::string entry = cut ? *cut : "input";
    const bool cache_train = cut && !config.augmentation;
    constexpr std::size_t kFeatureChunk = 32;

    std::optional<Tensor> train_features;
    if (cache_train) train_features = extract_features(graph, params, train_set, *cut, kFeatureChunk);
    std::optional<Tensor> val_features;
    if (!validation_set.empty())
        val_features = cut ? extract_features(graph, params, validation_set, *cut, kFeatureChunk)
                           : stack_pixels(validation_set);

    AdamState adam(config.adam, graph, params);
    EpochHistory history;
    std::vector<std::size_t> order(train_set.size());

    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::mt19937_64 rng(mix_seed(config.seed, epoch));
        std::shuffle(order.begin(), order.end(), rng);

        double loss_sum = 0.0;
        std::size_t correct = 0;
        for (std::size_t start = 0, batch = 0; start < order.size(); start += config.batch_size, ++batch) {
            const std::span<const std::size_t> rows(order.data() + start,
                                                    std::min(config.batch_size, order.size() - start));
            Tensor entry_value;
            if (cache_train) {
                entry_value = stack_rows(*train_features, rows);
            } else {
                std::vector<Sample> batch_samples;
                batch_samples.reserve(rows.size());
                for (std::size_t r : rows) {
                    if (config.augmentation)
                        batch_samples.push_back(augment(train_set[r], *config.augmentation,
                                                        mix_seed(mix_seed(config.seed, epoch), r)));
                    else
                        batch_samples.push_back(train_set[r]);
                }
                entry_value = stack_pixels(batch_samples);
                if (cut) entry_value = forward(graph, params, entry_value, {}, *cut);
            }

            Tape tape;
            LayerValues seeds;
            seeds.emplace(entry, std::move(entry_value));
            const ForwardOptions fwd{ops::DropoutMode::Train, mix_seed(mix_seed(config.seed, epoch), batch + 1)};
            Var probs = forward_on_tape(tape, graph, params, std::move(seeds), {}, fwd);
            const Tensor targets = stack_targets(train_set, rows);
            Var loss = bce_loss(probs, targets);
            const GradientMap grads = tape.backward(loss);
            adam.step(params, grads);

            loss_sum += loss.value()[0] * static_cast<double>(rows.size());
            correct += count_correct(probs.value(), train_set, rows);
        }

        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = loss_sum / static_cast<double>(train_set.size());
        rec.train_acc = static_cast<double>(correct) / static_cast<double>(train_set.size());
        if (val_features) {
            LayerValues seeds;
            seeds.emplace(entry, *val_features);
            const Tensor probs = forward_from(graph, params, std::move(seeds), {});
            std::vector<std::size_t> all(validation_set.size());
            std::iota(all.begin(), all.end(), std::size_t{0});
            rec.val_loss = bce_loss(probs, stack_targets(validation_set, all));
            rec.val_acc = static_cast<double>(count_correct(probs, validation_set, all)) /
                          static_cast<double>(validation_set.size());
        }
        history.push_back(rec);
    }
    return {std::move(params), std::move(history)};
}

std::string history_to_json(const EpochHistory& history, const TrainConfig& config, double dropout_rate,
                            const std::optional<ChannelMean>& channel_mean) {
    nlohmann::json hyper = {{"lr", config.adam.lr},
                            {"beta1", config.adam.beta1},
                            {"beta2", config.adam.beta2},
                            {"eps", config.adam.eps},
                            {"batch_size", config.batch_size},
                            {"epochs", config.epochs},
                            {"seed", config.seed},
                            {"dropout", dropout_rate},
                            {"augmentation", config.augmentation.has_value()},
                            {"subtract_mean", channel_mean.has_value()}};
    if (channel_mean) hyper["channel_mean"] = *channel_mean;
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& r : history) {
        arr.push_back({{"epoch", r.epoch},
                       {"train_loss", r.train_loss},
                       {"train_acc", r.train_acc},
                       {"val_loss", r.val_loss ? nlohmann::json(*r.val_loss) : nlohmann::json()},
                       {"val_acc", r.val_acc ? nlohmann::json(*r.val_acc) : nlohmann::json()},
                       {"config", hyper}});
    }
    return arr.dump(2);
}

EpochHistory history_from_json(const std::string& text) {
    EpochHistory out;
    try {
        const auto arr = nlohmann::json::parse(text);
        if (!arr.is_array()) throw FormatError("history file must hold a JSON array");
        for (const auto& j : arr) {
            EpochRecord r;
            r.epoch = j.at("epoch").get<std::size_t>();
            r.train_loss = j.at("train_loss").get<double>();
            r.train_acc = j.at("train_acc").get<double>();
            if (!j.at("val_loss").is_null()) r.val_loss = j.at("val_loss").get<double>();
            if (!j.at("val_acc").is_null()) r.val_acc = j.at("val_acc").get<double>();
            out.push_back(r);
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("malformed history JSON: ") + e.what());
    }
    return out;
}

// ---------------------------------------------------------------------------
// Prediction

std::vector<Prediction> predict(const ArchitectureGraph& graph, const ParameterStore& params, const Tensor& images) {
    Shape expected{images.rank() > 0 ? images.dim(0) : 0};
    expected.insert(expected.end(), graph.input_shape().begin(), graph.input_shape().end());
    if (images.rank() != 4 || images.shape() != expected)
        throw DimensionError("predict: expected images of shape (N," + shape_to_string(graph.input_shape()).substr(1) +
                             ", got " + shape_to_string(images.shape()));
    const Tensor probs = forward(graph, params, images);
    if (probs.rank() != 2 || probs.dim(1) != kNumClasses)
        throw DimensionError("predict: model output " + shape_to_string(probs.shape()) + " is not (N,2)");
    std::vector<Prediction> out;
    out.reserve(probs.dim(0));
    for (std::size_t n = 0; n < probs.dim(0); ++n) {
        Prediction p;
        p.probabilities = Tensor(Shape{kNumClasses}, {probs[n * 2], probs[n * 2 + 1]});
        const std::size_t best = probs[n * 2] >= probs[n * 2 + 1] ? 0 : 1;
        p.label = label_from_index(best);
        p.confidence = p.probabilities[best];
        out.push_back(std::move(p));
    }
    return out;
}

std::vector<Prediction> predict_samples(const ArchitectureGraph& graph, const ParameterStore& params,
                                        std::span<const Sample> samples, std::size_t batch_size) {
    if (batch_size == 0) throw ArgumentError("predict: batch size must be positive");
    std::vector<Prediction> out;
    out.reserve(samples.size());
    std::vector<std::size_t> rows;
    for (std::size_t start = 0; start < samples.size(); start += batch_size) {
        rows.clear();
        for (std::size_t i = start; i < std::min(samples.size(), start + batch_size); ++i) rows.push_back(i);
        auto part = predict(graph, params, stack_pixels(samples, rows));
        std::move(part.begin(), part.end(), std::back_inserter(out));
    }
    return out;
}

}  // namespace covilearn
