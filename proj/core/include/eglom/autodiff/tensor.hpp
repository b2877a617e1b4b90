#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <initializer_list>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eglom::ad {

/// Raised when operand extents do not agree.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Raised when a caller violates an operation's documented precondition.
class ContractError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

/// Packet-aligned so vectorized reductions split the same way for every
/// allocation, whichever thread made it.
using Storage = std::vector<double, Eigen::aligned_allocator<double>>;

/// Dense row-major tensor of doubles.
///
/// Ranks 0, 1 and 2 are the only ones the network code uses; a rank-1 tensor
/// of extent n behaves as a 1 x n matrix and a scalar as 1 x 1.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(std::vector<std::size_t> shape, double fill = 0.0);
    Tensor(std::vector<std::size_t> shape, std::vector<double> values);
    Tensor(std::vector<std::size_t> shape, Storage values);

    static Tensor scalar(double value);
    static Tensor vector(std::vector<double> values);
    static Tensor matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Tensor identity(std::size_t n);

    const std::vector<std::size_t>& shape() const noexcept { return shape_; }
    std::size_t rank() const noexcept { return shape_.size(); }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    std::size_t rows() const noexcept;
    std::size_t cols() const noexcept;

    double* data() noexcept { return values_.data(); }
    const double* data() const noexcept { return values_.data(); }
    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }
    Storage& storage() noexcept { return values_; }
    const Storage& storage() const noexcept { return values_; }

    double& operator[](std::size_t i) { return values_[i]; }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator()(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
    double operator()(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }

    /// The scalar value of a one-element tensor.
    double item() const;

    std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols(), cols()}; }
    std::span<const double> row(std::size_t r) const noexcept {
        return {values_.data() + r * cols(), cols()};
    }

    MatrixMap mat() noexcept { return {values_.data(), Eigen::Index(rows()), Eigen::Index(cols())}; }
    ConstMatrixMap mat() const noexcept {
        return {values_.data(), Eigen::Index(rows()), Eigen::Index(cols())};
    }

    bool same_shape(const Tensor& other) const noexcept { return shape_ == other.shape_; }
    bool all_finite() const noexcept;
    void fill(double value) noexcept;

    std::string shape_string() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::vector<std::size_t> shape_;
    Storage values_;
};

/// Tensor of the same shape with every entry zero.
Tensor zeros_like(const Tensor& t);

/// Scaled softmax of a value vector: softmax(scale * z). Max-subtracted.
std::vector<double> softmax(std::span<const double> z, double scale = 1.0);

}  // namespace eglom::ad
