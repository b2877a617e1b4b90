#pragma once

#include "eglom/harness/evaluate.hpp"

#include <optional>
#include <vector>

namespace eglom::harness {

/// Metrics over the locations whose object lies (lo, hi] degrees from the
/// training rotations. `metrics` is empty when no location falls in the bin.
struct DistanceBin {
    double lo_deg = 0.0;
    double hi_deg = 0.0;
    std::optional<MetricsRecord> metrics;
};

/// Bins of `width_deg` covering (0, 45].
std::vector<DistanceBin> interpolation_eval(const Predictions& preds,
                                            std::span<const world::Scene> scenes,
                                            double width_deg = 5.0);

}  // namespace eglom::harness
