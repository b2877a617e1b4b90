#pragma once

#include "eglom/autodiff/tape.hpp"

#include <span>
#include <utility>
#include <vector>

// Differentiable primitives. Every function computes its value eagerly and
// records a backward rule on the operands' tape.
namespace eglom::ad {

Var matmul(Var a, Var b);

/// x * w + b, with b broadcast over rows. x: [m x k], w: [k x n], b: [n].
Var affine(Var x, Var w, Var b);

/// Rectifier; the derivative at exactly zero is taken as zero.
Var relu(Var x);

Var add(Var a, Var b);
Var sub(Var a, Var b);
Var scale(Var x, double factor);

/// sum_i coeff_i * x_i over operands of identical shape.
Var lincomb(const std::vector<std::pair<double, Var>>& terms);

/// [a | b] for matrices with equal row counts.
Var concat_cols(Var a, Var b);

/// Columns [begin, begin + count) of x.
Var slice_cols(Var x, std::size_t begin, std::size_t count);

/// Row-wise softmax(scale * z), max-subtracted.
Var softmax_rows(Var z, double scale = 1.0);

Var sum(Var x);
Var mean(Var x);

/// Mean over all entries of (pred - target)^2.
Var mse(Var pred, const Tensor& target);

/// Mean over rows of -log softmax(logits)[label].
Var softmax_cross_entropy(Var logits, std::span<const int> labels);

/// Mean over rows of 1 - cos(a_r, b_r). A row where either vector has zero
/// norm contributes 0 and receives no gradient.
Var cosine_distance_rows(Var a, Var b);

}  // namespace eglom::ad
