#pragma once

#include "eglom/autodiff/checkpoint.hpp"
#include "eglom/autodiff/mlp.hpp"
#include "eglom/autodiff/ops.hpp"
#include "eglom/net/hyperparams.hpp"
#include "eglom/world/scene.hpp"

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace eglom::net {

using ad::Tape;
using ad::Tensor;
using ad::Var;

/// sin/cos of 2^k * pi * x and 2^k * pi * y for k = 0..F-1, interleaved as
/// (sin x, cos x, sin y, cos y) per frequency. Inputs are normalized to (-1, 1).
std::vector<double> position_encoding(double x, double y, std::size_t frequencies);

/// Parameter-free attention over one set of embeddings (rows of `e`):
/// w_ij = softmax_j(tau * <e_i, e_j>), a_i = sum_j w_ij e_j, self included.
Tensor attention_average(const Tensor& e, double tau);

/// Row-normalized attention weights for the same computation.
Tensor attention_weights(const Tensor& e, double tau);

/// Differentiable attention applied independently to each segment of rows
/// [offsets[s], offsets[s+1]).
Var segmented_attention(Var e, std::span<const std::size_t> offsets, double tau);

/// Locations of one or more scenes stacked row-wise.
struct Batch {
    Tensor symbols;       // R x 6 model input
    Tensor targets;       // R x 6 unperturbed symbols
    Tensor positions;     // R x 4F position encodings of the grid cells
    Tensor poses;         // R x 6 object pose affine per location
    std::vector<int> labels;
    std::vector<std::size_t> offsets;  // scene boundaries, size scenes + 1

    std::size_t rows() const noexcept { return labels.size(); }
    std::size_t scenes() const noexcept { return offsets.empty() ? 0 : offsets.size() - 1; }
};

Batch make_batch(std::span<const world::Scene* const> scenes, const HyperParams& hp);
Batch make_batch(const std::vector<world::Scene>& scenes, const HyperParams& hp);

/// A location, level and iteration where an activation stopped being finite.
class NonFiniteError : public std::runtime_error {
public:
    NonFiniteError(std::size_t row, std::string level, std::size_t iteration);
    std::size_t row() const noexcept { return row_; }
    const std::string& level() const noexcept { return level_; }
    std::size_t iteration() const noexcept { return iteration_; }

private:
    std::size_t row_;
    std::string level_;
    std::size_t iteration_;
};

/// The five shared networks and their hyper-parameters.
class EglomModel {
public:
    EglomModel(HyperParams hp, std::uint64_t seed);

    static EglomModel from_checkpoint(const ad::Checkpoint& ckpt);
    ad::Checkpoint to_checkpoint() const;

    const HyperParams& hyper() const noexcept { return hp_; }
    ad::ParameterSet& params() noexcept { return params_; }
    const ad::ParameterSet& params() const noexcept { return params_; }
    std::size_t parameter_count() const noexcept { return params_.scalar_count(); }

    /// Closed-form count for a configuration, from the layer layout.
    static std::size_t parameter_count(const HyperParams& hp);

    ad::MlpSpec symbol_encoder_spec() const;   // bu0
    ad::MlpSpec part_encoder_spec() const;     // bu1
    ad::MlpSpec object_head_spec() const;      // bu2
    ad::MlpSpec part_decoder_spec() const;     // td1
    ad::MlpSpec symbol_decoder_spec() const;   // td0

    const ad::Mlp& symbol_encoder() const noexcept { return bu0_; }
    const ad::Mlp& part_encoder() const noexcept { return bu1_; }
    const ad::Mlp& object_head() const noexcept { return bu2_; }
    const ad::Mlp& part_decoder() const noexcept { return td1_; }
    const ad::Mlp& symbol_decoder() const noexcept { return td0_; }

private:
    explicit EglomModel(HyperParams hp);
    void bind();

    HyperParams hp_;
    ad::ParameterSet params_;
    ad::Mlp bu0_, bu1_, bu2_, td1_, td0_;
};

/// Column state of every location at one iteration.
struct ColumnState {
    Var symbols;
    Var ellipse;
    Var object;
    /// td1(object + position) for this state's object embeddings; reused as the
    /// next iteration's level-1 top-down input.
    Var part_from_object;
};

struct StepResult {
    ColumnState next;
    Var reconstruction;   // td0(td1(next.object)) for the reconstruction loss
    Var bottom_up;        // bu1(next.ellipse), before combination
};

/// Initial state: input symbols, zero embeddings.
ColumnState initial_state(Tape& tape, const EglomModel& model, const Batch& batch);

/// One recurrent iteration t. Order: level 1 from (history, bu0(symbol),
/// td1(object)), then level 2 from (history, bu1(new ellipse), attention over
/// the iteration-t object embeddings), then level 0 from (previous symbol,
/// td0(new ellipse)).
StepResult step(Tape& tape, const EglomModel& model, const Batch& batch, const ColumnState& state,
                std::size_t t, Var positions);

struct Trajectory {
    std::vector<ColumnState> states;        // T + 1
    std::vector<Var> reconstructions;       // T
    Var bottom_up_final;
    Var pose;     // R x 6
    Var logits;   // R x N
};

Trajectory forward(Tape& tape, const EglomModel& model, const Batch& batch);

Var reconstruction_loss(const Trajectory& traj, const Batch& batch);
Var object_loss(const Trajectory& traj, const Batch& batch, double class_weight = 1.0);
Var island_regularizer(const Trajectory& traj);

struct LossTerms {
    Var reconstruction;
    Var object;
    Var regularizer;
    Var total;
};

/// total = l_rec * reconstruction + l_obj * object + l_reg * regularizer
Var total_loss(Var reconstruction, Var object, Var regularizer, const HyperParams& hp);
LossTerms loss_terms(const Trajectory& traj, const Batch& batch, const HyperParams& hp);

}  // namespace eglom::net
