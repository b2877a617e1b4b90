#pragma once

#include "eglom/autodiff/tape.hpp"
#include "eglom/util/random.hpp"

#include <string>
#include <vector>

namespace eglom::ad {

struct MlpSpec {
    std::size_t input = 1;
    std::vector<std::size_t> hidden;
    std::size_t output = 1;

    /// Throws ContractError if any size is zero.
    void validate() const;

    /// Weights plus biases of every layer.
    std::size_t parameter_count() const;

    /// Layer widths including input and output: input, hidden..., output.
    std::vector<std::size_t> widths() const;
};

/// Multi-layer perceptron with rectifier hidden layers and an identity output
/// layer. The weights live in an external ParameterSet so several networks can
/// share one optimizer and one checkpoint.
class Mlp {
public:
    Mlp() = default;

    /// Registers "<name>.w<k>" ([in x out]) and "<name>.b<k>" ([out]) in
    /// `params`: weights uniform in +-sqrt(6 / (fan_in + fan_out)), biases zero.
    Mlp(std::string name, MlpSpec spec, ParameterSet& params, Rng& rng);

    /// Binds to weights already present in `params` (e.g. after loading a
    /// checkpoint) and checks their shapes.
    static Mlp bind(std::string name, MlpSpec spec, const ParameterSet& params);

    Var forward(Tape& tape, const ParameterSet& params, Var x) const;

    const std::string& name() const noexcept { return name_; }
    const MlpSpec& spec() const noexcept { return spec_; }
    std::size_t layer_count() const noexcept { return weights_.size(); }
    std::size_t weight_index(std::size_t layer) const { return weights_[layer]; }
    std::size_t bias_index(std::size_t layer) const { return biases_[layer]; }

private:
    std::string name_;
    MlpSpec spec_;
    std::vector<std::size_t> weights_;
    std::vector<std::size_t> biases_;
};

}  // namespace eglom::ad
