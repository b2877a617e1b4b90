#include "eglom/autodiff/mlp.hpp"

#include "eglom/autodiff/ops.hpp"

#include <cmath>

namespace eglom::ad {

void MlpSpec::validate() const {
    if (input == 0 || output == 0) throw ContractError("MLP input and output sizes must be >= 1");
    for (std::size_t h : hidden) {
        if (h == 0) throw ContractError("MLP hidden sizes must be >= 1");
    }
}

std::vector<std::size_t> MlpSpec::widths() const {
    std::vector<std::size_t> w{input};
    w.insert(w.end(), hidden.begin(), hidden.end());
    w.push_back(output);
    return w;
}

std::size_t MlpSpec::parameter_count() const {
    const auto w = widths();
    std::size_t n = 0;
    for (std::size_t k = 0; k + 1 < w.size(); ++k) n += w[k] * w[k + 1] + w[k + 1];
    return n;
}

Mlp::Mlp(std::string name, MlpSpec spec, ParameterSet& params, Rng& rng)
    : name_(std::move(name)), spec_(std::move(spec)) {
    spec_.validate();
    const auto w = spec_.widths();
    for (std::size_t k = 0; k + 1 < w.size(); ++k) {
        const double limit = std::sqrt(6.0 / static_cast<double>(w[k] + w[k + 1]));
        Tensor weight = Tensor::matrix(w[k], w[k + 1]);
        for (double& v : weight.values()) v = rng.uniform(-limit, limit);
        weights_.push_back(params.add(name_ + ".w" + std::to_string(k), std::move(weight)));
        biases_.push_back(params.add(name_ + ".b" + std::to_string(k), Tensor({w[k + 1]}, 0.0)));
    }
}

Mlp Mlp::bind(std::string name, MlpSpec spec, const ParameterSet& params) {
    spec.validate();
    Mlp m;
    m.name_ = std::move(name);
    m.spec_ = std::move(spec);
    const auto w = m.spec_.widths();
    for (std::size_t k = 0; k + 1 < w.size(); ++k) {
        const auto wi = params.find(m.name_ + ".w" + std::to_string(k));
        const auto bi = params.find(m.name_ + ".b" + std::to_string(k));
        if (!wi || !bi) {
            throw ContractError("parameters for layer " + std::to_string(k) + " of '" + m.name_ +
                                "' are missing");
        }
        if (params[*wi].shape() != std::vector<std::size_t>{w[k], w[k + 1]} ||
            params[*bi].size() != w[k + 1]) {
            throw DimensionError("layer " + std::to_string(k) + " of '" + m.name_ +
                                 "' has shape " + params[*wi].shape_string());
        }
        m.weights_.push_back(*wi);
        m.biases_.push_back(*bi);
    }
    return m;
}

Var Mlp::forward(Tape& tape, const ParameterSet& params, Var x) const {
    if (x.value().cols() != spec_.input) {
        throw DimensionError("MLP '" + name_ + "' expects width " + std::to_string(spec_.input) +
                             ", got " + x.value().shape_string());
    }
    Var h = x;
    for (std::size_t k = 0; k < weights_.size(); ++k) {
        h = affine(h, tape.parameter(params, weights_[k]), tape.parameter(params, biases_[k]));
        if (k + 1 < weights_.size()) h = relu(h);
    }
    return h;
}

}  // namespace eglom::ad
