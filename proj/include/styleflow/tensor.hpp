#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace styleflow {

using Shape = std::vector<std::size_t>;

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

/// Dense row-major array of doubles. Rank 0 is a scalar.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape);
    Tensor(Shape shape, std::vector<double> data);

    static Tensor scalar(double value);
    static Tensor vector(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);
    static Tensor matrix(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor zeros_like(const Tensor& other) { return Tensor(other.shape_); }

    const Shape& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return data_.size(); }
    std::size_t dim(std::size_t axis) const { return shape_.at(axis); }

    // Rank-2 accessors; rank-1 tensors behave as a single row.
    std::size_t rows() const noexcept;
    std::size_t cols() const noexcept;

    std::span<double> data() noexcept { return data_; }
    std::span<const double> data() const noexcept { return data_; }
    std::vector<double>& storage() noexcept { return data_; }
    const std::vector<double>& storage() const noexcept { return data_; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& operator()(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

    std::span<double> row(std::size_t r) { return {data_.data() + r * cols(), cols()}; }
    std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols(), cols()}; }

    double item() const;
    bool all_finite() const noexcept;
    void fill(double value);

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    Shape shape_;
    std::vector<double> data_;
};

/// Largest absolute elementwise difference; shapes must match.
double max_abs_diff(const Tensor& a, const Tensor& b);

/// Bitwise comparison (distinguishes -0.0 from 0.0, equal NaN payloads compare equal).
bool bitwise_equal(const Tensor& a, const Tensor& b);

/// A trainable leaf: a named value plus its accumulated gradient.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;
    bool requires_grad = true;

    Parameter() = default;
    Parameter(std::string n, Tensor v)
        : name(std::move(n)), value(std::move(v)), grad(Tensor::zeros_like(value)) {}

    void zero_grad() { grad = Tensor::zeros_like(value); }
};

}  // namespace styleflow
