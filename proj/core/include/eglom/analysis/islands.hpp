#pragma once

#include "eglom/autodiff/tensor.hpp"

#include <optional>
#include <span>

namespace eglom::analysis {

/// Cosine similarity; 0 when either vector has zero norm.
double cosine_similarity(std::span<const double> a, std::span<const double> b);

/// Mean pairwise cosine similarity within objects minus the mean between
/// objects, over the rows of `embeddings` grouped by `labels`. Empty when
/// fewer than two objects are present or no within-object pair exists.
std::optional<double> island_separation(const ad::Tensor& embeddings, std::span<const int> labels);

}  // namespace eglom::analysis
