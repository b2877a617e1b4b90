#pragma once

#include "eglom/autodiff/checkpoint.hpp"
#include "eglom/harness/config.hpp"
#include "eglom/harness/evaluate.hpp"

#include <functional>
#include <ostream>
#include <stdexcept>
#include <vector>

namespace eglom::harness {

/// Training stopped on a non-finite loss or gradient. The parameters from
/// before the failing step are kept as `last_good`.
class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string& what, ad::Checkpoint last_good)
        : std::runtime_error(what), last_good_(std::move(last_good)) {}
    const ad::Checkpoint& last_good() const noexcept { return last_good_; }

private:
    ad::Checkpoint last_good_;
};

struct EpochRecord {
    std::size_t epoch = 0;     // 0 is the untrained model
    double train_loss = 0.0;   // mean over the epoch's steps; 0 for epoch 0
    MetricsRecord validation;
};

struct TrainResult {
    ad::Checkpoint best;       // lowest validation loss
    std::size_t best_epoch = 0;
    std::vector<EpochRecord> history;
    double wall_s = 0.0;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Shuffled minibatch Adam on the model's total loss. Each batch is cut into
/// `cfg.shards` fixed pieces whose gradients are summed in order, so results
/// do not depend on the thread count. When `cfg.output_dir` is set the run
/// writes metrics.csv, best.ckpt and, on failure, last_good.ckpt there.
TrainResult train(const RunConfig& cfg, const world::Dataset& train_set,
                  const world::Dataset& val_set, const EpochCallback& on_epoch = {});

void write_history_header(std::ostream& out);
void write_history_row(const EpochRecord& record, std::ostream& out);
void write_history_csv(const std::vector<EpochRecord>& history, std::ostream& out);

/// Evaluates a checkpoint of either model kind.
MetricsRecord evaluate_checkpoint(const ad::Checkpoint& ckpt, const world::Dataset& data,
                                  unsigned threads = 1);
Predictions predict_checkpoint(const ad::Checkpoint& ckpt, std::span<const world::Scene> scenes,
                               unsigned threads = 1);

}  // namespace eglom::harness
