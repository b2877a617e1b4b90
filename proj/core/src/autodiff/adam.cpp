#include "eglom/autodiff/adam.hpp"

#include <cmath>

namespace eglom::ad {

double AdamConfig::effective_rate(std::size_t epoch) const {
    return learning_rate * std::pow(decay, static_cast<double>(epoch));
}

AdamState::AdamState(AdamConfig cfg, const ParameterSet& params) : config(cfg) {
    first_moment.reserve(params.size());
    second_moment.reserve(params.size());
    for (const auto& p : params.tensors()) {
        first_moment.push_back(zeros_like(p));
        second_moment.push_back(zeros_like(p));
    }
}

void adam_update(AdamState& state, ParameterSet& params, const Gradients& grads,
                 std::size_t epoch) {
    if (grads.size() != params.size() || state.first_moment.size() != params.size()) {
        throw DimensionError("adam_update: parameter, gradient and moment counts differ");
    }
    const AdamConfig& c = state.config;
    state.step += 1;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(c.beta1, t);
    const double correction2 = 1.0 - std::pow(c.beta2, t);
    const double rate = c.effective_rate(epoch);

    for (std::size_t i = 0; i < params.size(); ++i) {
        if (!grads[i].same_shape(params[i])) {
            throw DimensionError("adam_update: gradient " + grads[i].shape_string() +
                                 " for parameter " + params[i].shape_string());
        }
        auto m = state.first_moment[i].mat().array();
        auto v = state.second_moment[i].mat().array();
        const auto g = grads[i].mat().array();
        m = c.beta1 * m + (1.0 - c.beta1) * g;
        v = c.beta2 * v + (1.0 - c.beta2) * g.square();
        params[i].mat().array() -=
            rate * (m / correction1) / ((v / correction2).sqrt() + c.epsilon);
    }
}

}  // namespace eglom::ad
