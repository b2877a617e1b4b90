#pragma once

#include "eglom/autodiff/tensor.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace eglom::ad {

/// Named collection of trainable tensors. Networks register their weights
/// here and refer to them by index.
class ParameterSet {
public:
    std::size_t add(std::string name, Tensor init);

    std::size_t size() const noexcept { return tensors_.size(); }
    Tensor& operator[](std::size_t i) { return tensors_[i]; }
    const Tensor& operator[](std::size_t i) const { return tensors_[i]; }
    const std::string& name(std::size_t i) const { return names_[i]; }
    std::optional<std::size_t> find(const std::string& name) const;

    std::vector<Tensor>& tensors() noexcept { return tensors_; }
    const std::vector<Tensor>& tensors() const noexcept { return tensors_; }

    /// Total number of scalar parameters.
    std::size_t scalar_count() const noexcept;

private:
    std::vector<std::string> names_;
    std::vector<Tensor> tensors_;
};

/// Per-parameter gradients, congruent with a ParameterSet.
class Gradients {
public:
    Gradients() = default;
    explicit Gradients(const ParameterSet& params);

    std::size_t size() const noexcept { return grads_.size(); }
    Tensor& operator[](std::size_t i) { return grads_[i]; }
    const Tensor& operator[](std::size_t i) const { return grads_[i]; }

    Gradients& operator+=(const Gradients& other);
    void scale(double factor);
    double squared_norm() const;
    bool all_finite() const;

private:
    std::vector<Tensor> grads_;
};

class Tape;
using NodeId = std::uint32_t;

/// Handle to a node recorded on a Tape.
struct Var {
    Tape* tape = nullptr;
    NodeId id = 0;

    const Tensor& value() const;
    bool valid() const noexcept { return tape != nullptr; }
};

/// Define-by-run reverse-mode tape. Nodes are appended in evaluation order,
/// so reverse insertion order is a valid topological order for backward.
/// A tape is confined to one thread.
class Tape {
public:
    /// Propagates grad(self) into the gradient buffers of the node's inputs.
    using BackwardFn = std::function<void(Tape&, NodeId self)>;

    Tape() = default;
    Tape(const Tape&) = delete;
    Tape& operator=(const Tape&) = delete;

    Var constant(Tensor value);

    /// Leaf bound to params[index]. The tensor is referenced, not copied, and
    /// every call with the same index returns the same node.
    Var parameter(const ParameterSet& params, std::size_t index);

    /// Records an operation whose value has already been computed.
    Var record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward);
    Var record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward);

    const Tensor& value(NodeId id) const;
    bool requires_grad(NodeId id) const { return nodes_[id].requires_grad; }

    /// Gradient buffer of a node, allocated as zeros on first access.
    Tensor& grad(NodeId id);

    /// Seeds d(loss)/d(loss) = 1 and runs all recorded backward rules.
    void backward(Var loss);

    /// Gradients of every parameter in `params`; parameters the loss did not
    /// reach get zeros.
    Gradients parameter_gradients(const ParameterSet& params) const;

    std::size_t size() const noexcept { return nodes_.size(); }

    /// Address of the storage a parameter leaf reads from.
    const Tensor* parameter_storage(std::size_t param_index) const;

private:
    struct Node {
        Tensor owned;
        const Tensor* external = nullptr;
        Tensor grad;
        BackwardFn backward;
        std::size_t value_size = 0;
        bool requires_grad = false;
    };

    Var push(Node node);

    std::vector<Node> nodes_;
    const ParameterSet* bound_params_ = nullptr;
    std::unordered_map<std::size_t, NodeId> param_nodes_;
};

}  // namespace eglom::ad
