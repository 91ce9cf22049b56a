#include "styleflow/tensor.hpp"

#include <cmath>
#include <cstring>
#include <functional>
#include <numeric>

#include "styleflow/error.hpp"

namespace styleflow {

std::string shape_string(const Shape& shape) {
    std::string out = "[";
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) out += ",";
        out += std::to_string(shape[i]);
    }
    return out + "]";
}

std::size_t shape_size(const Shape& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}

Tensor::Tensor(Shape shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
    if (data_.size() != shape_size(shape_)) {
        throw DimensionError("data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_string(shape_));
    }
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

Tensor Tensor::vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
    return Tensor({rows, cols}, std::move(values));
}

Tensor Tensor::matrix(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r ? rows.begin()->size() : 0;
    std::vector<double> data;
    data.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("ragged matrix literal");
        data.insert(data.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(data));
}

std::size_t Tensor::rows() const noexcept {
    if (shape_.size() == 2) return shape_[0];
    return shape_.empty() ? 1 : 1;
}

std::size_t Tensor::cols() const noexcept {
    if (shape_.size() == 2) return shape_[1];
    if (shape_.size() == 1) return shape_[0];
    return 1;
}

double Tensor::item() const {
    if (data_.size() != 1) {
        throw DimensionError("item() on tensor of shape " + shape_string(shape_));
    }
    return data_[0];
}

bool Tensor::all_finite() const noexcept {
    for (double v : data_) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

void Tensor::fill(double value) { std::fill(data_.begin(), data_.end(), value); }

double max_abs_diff(const Tensor& a, const Tensor& b) {
    if (a.shape() != b.shape()) {
        throw DimensionError("max_abs_diff: " + shape_string(a.shape()) + " vs " +
                             shape_string(b.shape()));
    }
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
    return worst;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
    return a.shape() == b.shape() &&
           (a.size() == 0 ||
            std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0);
}

}  // namespace styleflow
