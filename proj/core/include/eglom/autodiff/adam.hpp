#pragma once

#include "eglom/autodiff/tape.hpp"

#include <cstdint>
#include <vector>

namespace eglom::ad {

/// Only the learning rate and its per-epoch decay are meant to be tuned; the
/// moment coefficients keep their customary values.
struct AdamConfig {
    double learning_rate = 1e-3;
    double decay = 1.0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    /// learning_rate * decay^epoch
    double effective_rate(std::size_t epoch) const;
};

struct AdamState {
    AdamConfig config;
    std::uint64_t step = 0;
    std::vector<Tensor> first_moment;
    std::vector<Tensor> second_moment;

    AdamState() = default;
    AdamState(AdamConfig cfg, const ParameterSet& params);
};

/// One bias-corrected Adam step at the learning rate for `epoch`.
void adam_update(AdamState& state, ParameterSet& params, const Gradients& grads,
                 std::size_t epoch);

}  // namespace eglom::ad
