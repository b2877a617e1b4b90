#include "eglom/analysis/islands.hpp"

#include <cmath>
#include <set>

namespace eglom::analysis {

double cosine_similarity(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw ad::DimensionError("cosine of vectors with different lengths");
    double ab = 0.0, aa = 0.0, bb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ab += a[i] * b[i];
        aa += a[i] * a[i];
        bb += b[i] * b[i];
    }
    if (aa == 0.0 || bb == 0.0) return 0.0;
    return ab / std::sqrt(aa * bb);
}

std::optional<double> island_separation(const ad::Tensor& embeddings, std::span<const int> labels) {
    const std::size_t n = embeddings.rows();
    if (labels.size() != n) throw ad::DimensionError("one label per embedding row expected");
    if (std::set<int>(labels.begin(), labels.end()).size() < 2) return std::nullopt;
    double within = 0.0, between = 0.0;
    std::size_t nw = 0, nb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = i + 1; j < n; ++j) {
            const double c = cosine_similarity(embeddings.row(i), embeddings.row(j));
            if (labels[i] == labels[j]) {
                within += c;
                ++nw;
            } else {
                between += c;
                ++nb;
            }
        }
    }
    if (nw == 0) return std::nullopt;
    return within / double(nw) - between / double(nb);
}

}  // namespace eglom::analysis
