#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "covilearn/architecture.hpp"
#include "covilearn/tensor.hpp"

namespace covilearn {

// Named parameter tensors for one ArchitectureGraph.
class ParameterStore {
public:
    using Map = std::map<std::string, Tensor, std::less<>>;

    bool contains(std::string_view name) const { return values_.find(name) != values_.end(); }
    const Tensor& at(std::string_view name) const;
    Tensor& at(std::string_view name);
    void set(std::string name, Tensor value) { values_.insert_or_assign(std::move(name), std::move(value)); }
    std::size_t size() const noexcept { return values_.size(); }
    std::size_t scalar_count() const;

    Map::const_iterator begin() const { return values_.begin(); }
    Map::const_iterator end() const { return values_.end(); }

    friend bool operator==(const ParameterStore&, const ParameterStore&) = default;

private:
    Map values_;
};

// Fresh parameters: He-uniform for convolutions and ReLU-facing dense layers,
// Glorot-uniform for the logits layer, zero biases, batchnorm gamma=1,
// beta=0, moving mean 0 and moving variance 1. Each tensor draws from its
// own generator keyed by (seed, parameter name).
ParameterStore initialize_parameters(const ArchitectureGraph& graph, std::uint64_t seed);

// Throws FormatError naming the first graph parameter absent from the store
// or stored with the wrong shape.
void require_matches(const ParameterStore& store, const ArchitectureGraph& graph);

// Names of the parameters belonging to non-frozen layers, in graph order.
std::vector<std::string> trainable_parameter_names(const ArchitectureGraph& graph);

// Stable 64-bit mix of a seed with a string or integer key.
std::uint64_t mix_seed(std::uint64_t seed, std::string_view key);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key);

}  // namespace covilearn
