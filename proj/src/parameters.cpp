#include "covilearn/parameters.hpp"

#include <cmath>
#include <random>

#include "covilearn/errors.hpp"

namespace covilearn {

const Tensor& ParameterStore::at(std::string_view name) const {
    auto it = values_.find(name);
    if (it == values_.end()) throw ArgumentError("parameter '" + std::string(name) + "' not in store");
    return it->second;
}

Tensor& ParameterStore::at(std::string_view name) {
    auto it = values_.find(name);
    if (it == values_.end()) throw ArgumentError("parameter '" + std::string(name) + "' not in store");
    return it->second;
}

std::size_t ParameterStore::scalar_count() const {
    std::size_t n = 0;
    for (const auto& [_, t] : values_) n += t.size();
    return n;
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

std::uint64_t mix_seed(std::uint64_t seed, std::string_view key) {
    std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
    for (unsigned char c : key) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return splitmix64(seed ^ splitmix64(h));
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key) { return splitmix64(seed ^ splitmix64(key)); }

ParameterStore initialize_parameters(const ArchitectureGraph& graph, std::uint64_t seed) {
    ParameterStore store;
    for (const auto& layer : graph.layers()) {
        for (const auto& p : layer.params) {
            Tensor t(p.shape);
            switch (p.role) {
                case ParamRole::Kernel: {
                    double fan_in = 0, fan_out = 0;
                    if (layer.kind == LayerKind::Conv) {
                        const double area = static_cast<double>(p.shape[2] * p.shape[3]);
                        fan_in = static_cast<double>(p.shape[1]) * area;
                        fan_out = static_cast<double>(p.shape[0]) * area;
                    } else {
                        fan_in = static_cast<double>(p.shape[0]);
                        fan_out = static_cast<double>(p.shape[1]);
                    }
                    const double limit = layer.attrs.init == InitScheme::GlorotUniform
                                             ? std::sqrt(6.0 / (fan_in + fan_out))
                                             : std::sqrt(6.0 / fan_in);
                    std::mt19937_64 rng(mix_seed(seed, p.name));
                    std::uniform_real_distribution<double> dist(-limit, limit);
                    for (double& v : t.data()) v = dist(rng);
                    break;
                }
                case ParamRole::Gamma:
                case ParamRole::MovingVariance: t.fill(1.0); break;
                case ParamRole::Bias:
                case ParamRole::Beta:
                case ParamRole::MovingMean: break;
            }
            store.set(p.name, std::move(t));
        }
    }
    return store;
}

void require_matches(const ParameterStore& store, const ArchitectureGraph& graph) {
    for (const auto& layer : graph.layers()) {
        for (const auto& p : layer.params) {
            if (!store.contains(p.name))
                throw FormatError("layer '" + layer.name + "': parameter '" + p.name + "' is missing");
            const Shape& have = store.at(p.name).shape();
            if (have != p.shape)
                throw FormatError("layer '" + layer.name + "': parameter '" + p.name + "' has shape " +
                                  shape_to_string(have) + ", graph expects " + shape_to_string(p.shape));
        }
    }
}

std::vector<std::string> trainable_parameter_names(const ArchitectureGraph& graph) {
    std::vector<std::string> names;
    for (const auto& layer : graph.layers())
        if (!layer.frozen)
            for (const auto& p : layer.params) names.push_back(p.name);
    return names;
}

}  // namespace covilearn
