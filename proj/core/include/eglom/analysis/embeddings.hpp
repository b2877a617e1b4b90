#pragma once

#include "eglom/net/model.hpp"
#include "eglom/world/scene.hpp"

#include <array>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace eglom::analysis {

/// One exported embedding vector.
struct EmbeddingRecord {
    std::size_t scene = 0;
    std::size_t iteration = 0;   // 0 is the initial state
    std::size_t location = 0;
    std::string level;           // "ellipse" or "object"
    int label = 0;               // object instance index
    std::array<double, 2> cell{};
    std::vector<double> vec;
};

/// Writes one JSON line per (scene, iteration, location, level) with fields
/// {scene, iter, loc, level, label, cell, vec}. Returns the record count.
std::size_t export_embeddings(const net::EglomModel& model, std::span<const world::Scene> scenes,
                              std::ostream& out);

std::vector<EmbeddingRecord> read_embeddings(std::istream& in);

/// Right singular vectors of the mean-centered rows of `samples`, ordered by
/// descending singular value and truncated to the numerical rank.
struct SvdBasis {
    std::vector<double> mean;
    std::vector<std::vector<double>> vectors;
    std::vector<double> singular_values;
    std::size_t rank = 0;
    bool truncated = false;   // rank < min(samples, dimensions)

    /// Coordinates of `x - mean` along each basis vector.
    std::vector<double> project(std::span<const double> x) const;
    /// mean + sum_k coords[k] * vectors[k]
    std::vector<double> reconstruct(std::span<const double> coords) const;
};

SvdBasis svd_basis(const ad::Tensor& samples);

enum class PoseField { x, y, sx, sy, rotation };
std::string_view pose_field_name(PoseField f);
PoseField parse_pose_field(std::string_view name);
double pose_field_value(const world::ObjectPose& pose, PoseField f);

struct Correlation {
    std::size_t basis_index = 0;
    double singular_value = 0.0;
    PoseField field = PoseField::x;
    double r = 0.0;
    bool degenerate = false;   // constant projection or field
};

/// Pearson correlation of x and y; nullopt when either is constant.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);

/// Correlation of every basis projection of `samples` with one pose field.
/// Rotation is correlated through sin and cos, keeping the larger magnitude.
std::vector<Correlation> basis_pose_correlation(const ad::Tensor& samples,
                                                std::span<const world::ObjectPose> poses,
                                                const SvdBasis& basis, PoseField field);

/// Header: basis_index,singular_value,field,r
void write_correlation_csv(const std::vector<Correlation>& rows, std::ostream& out);

/// Final object embeddings of up to `max_samples` locations with the pose of
/// the object each belongs to.
struct EmbeddingSamples {
    ad::Tensor embeddings;
    std::vector<world::ObjectPose> poses;
    std::vector<int> classes;
};

EmbeddingSamples collect_object_samples(const net::EglomModel& model,
                                        std::span<const world::Scene> scenes,
                                        std::size_t max_samples = 5000);

struct ModifiedSymbol {
    double delta = 0.0;
    std::array<double, 6> pose{};
    std::vector<double> probabilities;
};

/// Adds each delta to coordinate `index` of `embedding` and decodes the result
/// with the object head. Throws std::out_of_range for index >= D.
std::vector<ModifiedSymbol> embedding_modification(const net::EglomModel& model,
                                                   std::span<const double> embedding,
                                                   std::size_t index,
                                                   std::span<const double> deltas);

/// One panel per delta, drawing the most probable template at the decoded pose.
std::string render_modification_svg(const std::vector<ModifiedSymbol>& symbols,
                                    const std::vector<world::ObjectTemplate>& templates);

}  // namespace eglom::analysis
