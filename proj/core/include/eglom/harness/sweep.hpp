#pragma once

#include "eglom/harness/train.hpp"

#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace eglom::harness {

struct SweepRow {
    std::string run_id;
    std::string axis;
    std::string value;
    std::uint64_t seed = 0;
    MetricsRecord metrics;   // best-checkpoint validation metrics
};

/// One independent training run per (axis value, seed). Run k of a value uses
/// seed cfg.seed + k, whatever the other values are. Runs are spread over
/// cfg.worker_threads() workers, each training single-threaded.
std::vector<SweepRow> sweep(const RunConfig& cfg, const world::Dataset& train_set,
                            const world::Dataset& val_set);

/// Header: run_id,axis,value,seed,whole_mse,part_mse,accuracy,island_sep,wall_s
void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out);

struct Interval {
    double mean = 0.0;
    double lo = 0.0;
    double hi = 0.0;
};

/// Percentile bootstrap of the mean at the given two-sided level.
Interval bootstrap_mean(const std::vector<double>& samples, double level = 0.9,
                        std::size_t resamples = 2000, std::uint64_t seed = 0);

struct SweepSummary {
    std::string axis;
    std::string value;
    std::string metric;
    std::size_t runs = 0;
    Interval interval;
};

/// Mean and 90% interval of whole_mse, part_mse and accuracy per value.
std::vector<SweepSummary> summarize(const std::vector<SweepRow>& rows);
void write_summary_csv(const std::vector<SweepSummary>& summary, std::ostream& out);

}  // namespace eglom::harness
