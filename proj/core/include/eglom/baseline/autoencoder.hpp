#pragma once

#include "eglom/autodiff/checkpoint.hpp"
#include "eglom/autodiff/mlp.hpp"
#include "eglom/autodiff/ops.hpp"
#include "eglom/world/scene.hpp"

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace eglom::baseline {

using ad::Tape;
using ad::Tensor;
using ad::Var;

/// Fixed-layout MLP autoencoder over whole scenes. Every ellipse contributes
/// its 6 coefficients and snapped cell centre, objects in instance order and
/// parts in template order; the cell centres are concatenated again at the
/// bottleneck. The decoder emits the reconstructed ellipses followed by pose
/// and class logits per object.
struct BaselineSpec {
    std::size_t objects = 2;
    std::size_t classes = 2;
    std::size_t hidden = 1024;
    std::size_t bottleneck = 512;
    std::size_t encoder_layers = 3;
    std::size_t decoder_layers = 3;

    void validate() const;

    std::size_t ellipses() const noexcept { return objects * world::kPartsPerObject; }
    std::size_t input_width() const noexcept { return ellipses() * 8; }
    std::size_t grid_width() const noexcept { return ellipses() * 2; }
    std::size_t reconstruction_width() const noexcept { return ellipses() * 6; }
    std::size_t output_width() const noexcept {
        return reconstruction_width() + objects * (6 + classes);
    }

    ad::MlpSpec encoder_spec() const;
    ad::MlpSpec decoder_spec() const;
    std::size_t parameter_count() const;

    std::map<std::string, std::string> to_map() const;
    static BaselineSpec from_map(const std::map<std::string, std::string>& values);
    /// Sets one field by key; returns false for unknown keys.
    bool set(const std::string& key, const std::string& value);
};

BaselineSpec spec_for(world::Task task);

/// Flat input row of one scene. Throws ad::ContractError unless location i
/// holds part i % 5 of object i / 5.
std::vector<double> encode_input(const world::Scene& scene, std::size_t objects);

struct BaselineBatch {
    Tensor inputs;    // B x input_width
    Tensor grid;      // B x grid_width
    Tensor targets;   // B x reconstruction_width, unperturbed symbols
    Tensor poses;     // (B * objects) x 6
    std::vector<int> labels;  // B * objects
};

BaselineBatch make_batch(std::span<const world::Scene* const> scenes, const BaselineSpec& spec);
BaselineBatch make_batch(const std::vector<world::Scene>& scenes, const BaselineSpec& spec);

class BaselineModel {
public:
    BaselineModel(BaselineSpec spec, std::uint64_t seed);

    static BaselineModel from_checkpoint(const ad::Checkpoint& ckpt);
    ad::Checkpoint to_checkpoint() const;

    const BaselineSpec& spec() const noexcept { return spec_; }
    ad::ParameterSet& params() noexcept { return params_; }
    const ad::ParameterSet& params() const noexcept { return params_; }
    std::size_t parameter_count() const noexcept { return params_.scalar_count(); }

    const ad::Mlp& encoder() const noexcept { return encoder_; }
    const ad::Mlp& decoder() const noexcept { return decoder_; }

private:
    explicit BaselineModel(BaselineSpec spec);

    BaselineSpec spec_;
    ad::ParameterSet params_;
    ad::Mlp encoder_, decoder_;
};

struct BaselineOutput {
    Var reconstruction;  // B x reconstruction_width
    Var pose;            // (B * objects) x 6
    Var logits;          // (B * objects) x classes
};

/// Throws ad::DimensionError when the input width does not match the spec.
BaselineOutput baseline_forward(Tape& tape, const BaselineModel& model, Var inputs, Var grid);
BaselineOutput baseline_forward(Tape& tape, const BaselineModel& model, const BaselineBatch& batch);

/// Reconstruction MSE + pose MSE + cross-entropy, unit weights.
Var baseline_loss(const BaselineOutput& out, const BaselineBatch& batch);

}  // namespace eglom::baseline
