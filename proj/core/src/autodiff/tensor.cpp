#include "eglom/autodiff/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <sstream>

namespace eglom::ad {

namespace {

std::size_t extent_product(const std::vector<std::size_t>& shape) {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

}  // namespace

Tensor::Tensor(std::vector<std::size_t> shape, double fill)
    : shape_(std::move(shape)), values_(extent_product(shape_), fill) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> values)
    : Tensor(std::move(shape), Storage(values.begin(), values.end())) {}

Tensor::Tensor(std::vector<std::size_t> shape, Storage values)
    : shape_(std::move(shape)), values_(std::move(values)) {
    if (extent_product(shape_) != values_.size()) {
        throw DimensionError("tensor shape " + shape_string() + " does not hold " +
                             std::to_string(values_.size()) + " values");
    }
}

Tensor Tensor::scalar(double value) { return Tensor({}, std::vector<double>{value}); }

Tensor Tensor::vector(std::vector<double> values) {
    const std::size_t n = values.size();
    return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, double fill) {
    return Tensor({rows, cols}, fill);
}

Tensor Tensor::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const std::size_t r = rows.size();
    const std::size_t c = r == 0 ? 0 : rows.begin()->size();
    std::vector<double> values;
    values.reserve(r * c);
    for (const auto& row : rows) {
        if (row.size() != c) throw DimensionError("ragged rows in Tensor::from_rows");
        values.insert(values.end(), row.begin(), row.end());
    }
    return Tensor({r, c}, std::move(values));
}

Tensor Tensor::identity(std::size_t n) {
    Tensor t = matrix(n, n);
    for (std::size_t i = 0; i < n; ++i) t(i, i) = 1.0;
    return t;
}

std::size_t Tensor::rows() const noexcept {
    return shape_.size() == 2 ? shape_[0] : 1;
}

std::size_t Tensor::cols() const noexcept {
    switch (shape_.size()) {
        case 0: return 1;
        case 1: return shape_[0];
        case 2: return shape_[1];
        default: return values_.size() / std::max<std::size_t>(shape_[0], 1);
    }
}

double Tensor::item() const {
    if (values_.size() != 1) {
        throw DimensionError("item() on tensor of shape " + shape_string());
    }
    return values_[0];
}

bool Tensor::all_finite() const noexcept {
    return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

void Tensor::fill(double value) noexcept { std::fill(values_.begin(), values_.end(), value); }

std::string Tensor::shape_string() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? "x" : "") << shape_[i];
    os << ']';
    return os.str();
}

Tensor zeros_like(const Tensor& t) { return Tensor(t.shape(), 0.0); }

std::vector<double> softmax(std::span<const double> z, double scale) {
    if (z.empty()) throw ContractError("softmax of an empty vector");
    std::vector<double> out(z.size());
    double hi = -INFINITY;
    for (double v : z) hi = std::max(hi, scale * v);
    double total = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        out[i] = std::exp(scale * z[i] - hi);
        total += out[i];
    }
    for (double& v : out) v /= total;
    return out;
}

}  // namespace eglom::ad
