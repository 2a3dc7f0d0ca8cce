#include "covilearn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "covilearn/errors.hpp"

namespace covilearn {

std::size_t shape_numel(const Shape& shape) {
    std::size_t n = 1;
    for (auto e : shape) n *= e;
    return n;
}

std::string shape_to_string(const Shape& shape) {
    std::ostringstream os;
    os << '(';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ',';
        os << shape[i];
    }
    os << ')';
    return os.str();
}

namespace {

void check_extents(const Shape& shape) {
    if (shape.empty()) throw DimensionError("tensor shape must have at least one axis");
    for (auto e : shape)
        if (e == 0) throw DimensionError("tensor extents must be positive, got " + shape_to_string(shape));
}

}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
    check_extents(shape_);
    data_.assign(shape_numel(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
    check_extents(shape_);
    if (data_.size() != shape_numel(shape_)) {
        std::ostringstream os;
        os << "tensor data length " << data_.size() << " does not match shape " << shape_to_string(shape_);
        throw DimensionError(os.str());
    }
}

Tensor Tensor::from(Shape shape, std::initializer_list<double> values) {
    return Tensor(std::move(shape), std::vector<double>(values));
}

std::size_t Tensor::dim(std::size_t axis) const {
    if (axis >= shape_.size())
        throw DimensionError("axis " + std::to_string(axis) + " out of range for shape " + shape_to_string(shape_));
    return shape_[axis];
}

Tensor Tensor::reshaped(Shape shape) const {
    if (shape_numel(shape) != data_.size())
        throw DimensionError("cannot reshape " + shape_to_string(shape_) + " to " + shape_to_string(shape));
    return Tensor(std::move(shape), data_);
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

void require_rank(const Tensor& t, std::size_t rank, const char* what) {
    if (t.rank() != rank) {
        std::ostringstream os;
        os << what << ": expected rank " << rank << ", got shape " << shape_to_string(t.shape());
        throw DimensionError(os.str());
    }
}

void require_finite(const Tensor& t, const char* what) {
    if (!t.all_finite()) throw ArgumentError(std::string(what) + ": non-finite value (NaN or inf) in tensor");
}

}  // namespace covilearn
