#pragma once

#include "eglom/baseline/autoencoder.hpp"
#include "eglom/net/model.hpp"
#include "eglom/world/scene.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace eglom::harness {

/// Per-location model outputs for a list of scenes, rows stacked in scene order.
struct Predictions {
    std::vector<std::size_t> offsets;         // scenes + 1
    ad::Tensor reconstruction;                // R x 6, last iteration
    std::vector<ad::Tensor> per_iteration;    // reconstruction at every iteration
    ad::Tensor pose;                          // R x 6
    ad::Tensor probabilities;                 // R x N
    ad::Tensor object_embedding;              // R x D final; empty for the baseline
    double loss = 0.0;                        // mean total loss over scenes
};

Predictions predict(const net::EglomModel& model, std::span<const world::Scene> scenes,
                    unsigned threads = 1, std::size_t chunk = 64);
Predictions predict(const baseline::BaselineModel& model, std::span<const world::Scene> scenes,
                    unsigned threads = 1, std::size_t chunk = 64);

struct MetricsRecord {
    double whole_mse = 0.0;
    double part_mse = 0.0;
    double accuracy = 0.0;
    std::vector<double> part_mse_by_iteration;
    std::optional<double> island_separation;
    std::optional<double> loss;
    double wall_s = 0.0;
    std::size_t parameter_count = 0;
    std::size_t scenes = 0;
    std::size_t locations = 0;
};

using LocationFilter = std::function<bool(std::size_t scene, std::size_t location)>;

/// Whole MSE is the per-location pose error, part MSE the last-iteration
/// reconstruction error against unperturbed truth; both average over the six
/// coefficients. Only locations accepted by `keep` count. Throws
/// std::invalid_argument when no location is selected.
MetricsRecord metrics_from(const Predictions& preds, std::span<const world::Scene> scenes,
                           const LocationFilter& keep = {});

/// Throws ConfigError when the model does not fit the dataset's task and
/// std::invalid_argument for an empty dataset.
MetricsRecord evaluate(const net::EglomModel& model, const world::Dataset& data, unsigned threads = 1);
MetricsRecord evaluate(const baseline::BaselineModel& model, const world::Dataset& data,
                       unsigned threads = 1);

void check_compatible(const net::EglomModel& model, world::Task task);
void check_compatible(const baseline::BaselineModel& model, world::Task task);

}  // namespace eglom::harness
