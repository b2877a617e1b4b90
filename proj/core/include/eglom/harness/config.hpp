#pragma once

#include "eglom/autodiff/adam.hpp"
#include "eglom/baseline/autoencoder.hpp"
#include "eglom/net/hyperparams.hpp"
#include "eglom/world/scene.hpp"

#include <cstdint>
#include <filesystem>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace eglom::harness {

/// Invalid or inconsistent run configuration.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class ModelKind { eglom, baseline };

/// Everything one training run needs. Read from flat `key = value` text:
///
///   model             eglom | baseline
///   task              1-from-2 | 2-from-2 | 2-from-20 | 1-from-20
///   train_data        dataset file; generated from data_seed when empty
///   val_data          dataset file; generated when empty
///   train_count       scenes to generate for training (50000)
///   val_count         scenes to generate for validation (5000)
///   data_seed         first scene seed of generated data (1)
///   perturb           perturbed inputs (false)
///   rotation_split    draw rotations from the training quadrants only (false)
///   learning_rate     Adam step size (0.001)
///   lr_decay          per-epoch learning-rate factor (1)
///   epochs            passes over the training set (20)
///   batch_size        scenes per step (64)
///   shards            fixed gradient shards per batch (4)
///   seed              weight initialization and shuffling (0)
///   threads           worker threads (hardware concurrency)
///   output_dir        run directory; nothing is written when empty
///   axis, values      sweep axis and comma-separated values
///   seeds             runs per sweep value (3)
///
/// plus every HyperParams key (embedding_dim, iterations, ...) and the
/// baseline layout as baseline.hidden, baseline.encoder_layers, and so on.
struct RunConfig {
    ModelKind model = ModelKind::eglom;
    world::Task task = world::Task::one_from_two;
    std::filesystem::path train_data;
    std::filesystem::path val_data;
    std::size_t train_count = 50000;
    std::size_t val_count = 5000;
    std::uint64_t data_seed = 1;
    bool perturb = false;
    bool rotation_split = false;

    net::HyperParams hyper;
    std::map<std::string, std::string> baseline_overrides;
    ad::AdamConfig optimizer;
    std::size_t epochs = 20;
    std::size_t batch_size = 64;
    std::size_t shards = 4;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::filesystem::path output_dir;

    std::string axis;
    std::vector<std::string> values;
    std::size_t seeds = 3;

    /// Sets one key; throws ConfigError for unknown keys or bad values.
    void set(const std::string& key, const std::string& value);
    std::map<std::string, std::string> to_map() const;

    /// Cross-field checks, including that referenced files exist.
    void validate() const;

    /// Class count and object layout follow the task.
    net::HyperParams model_hyper() const;
    baseline::BaselineSpec baseline_spec() const;
    unsigned worker_threads() const;

    world::DatasetSpec train_spec() const;
    world::DatasetSpec val_spec() const;
};

/// Parses `key = value` lines; `#` starts a comment.
RunConfig parse_config(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Keys a sweep may vary.
const std::vector<std::string>& sweep_axes();

/// Applies one sweep axis value to a configuration.
void apply_axis(RunConfig& cfg, const std::string& axis, const std::string& value);

/// Loads the configured dataset file or generates it.
world::Dataset load_or_generate(const std::filesystem::path& path, const world::DatasetSpec& spec,
                                unsigned threads);

}  // namespace eglom::harness
