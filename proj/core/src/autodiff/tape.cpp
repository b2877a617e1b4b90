#include "eglom/autodiff/tape.hpp"

#include <cmath>

namespace eglom::ad {

std::size_t ParameterSet::add(std::string name, Tensor init) {
    if (find(name)) throw ContractError("duplicate parameter name '" + name + "'");
    names_.push_back(std::move(name));
    tensors_.push_back(std::move(init));
    return tensors_.size() - 1;
}

std::optional<std::size_t> ParameterSet::find(const std::string& name) const {
    for (std::size_t i = 0; i < names_.size(); ++i) {
        if (names_[i] == name) return i;
    }
    return std::nullopt;
}

std::size_t ParameterSet::scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& t : tensors_) n += t.size();
    return n;
}

Gradients::Gradients(const ParameterSet& params) {
    grads_.reserve(params.size());
    for (const auto& t : params.tensors()) grads_.push_back(zeros_like(t));
}

Gradients& Gradients::operator+=(const Gradients& other) {
    if (other.size() != size()) throw DimensionError("gradient sets differ in length");
    for (std::size_t i = 0; i < size(); ++i) {
        if (!grads_[i].same_shape(other.grads_[i])) {
            throw DimensionError("gradient shape mismatch at parameter " + std::to_string(i));
        }
        grads_[i].mat() += other.grads_[i].mat();
    }
    return *this;
}

void Gradients::scale(double factor) {
    for (auto& g : grads_) g.mat() *= factor;
}

double Gradients::squared_norm() const {
    double total = 0.0;
    for (const auto& g : grads_) total += g.mat().squaredNorm();
    return total;
}

bool Gradients::all_finite() const {
    for (const auto& g : grads_) {
        if (!g.all_finite()) return false;
    }
    return true;
}

const Tensor& Var::value() const { return tape->value(id); }

Var Tape::push(Node node) {
    node.value_size = node.external ? node.external->size() : node.owned.size();
    nodes_.push_back(std::move(node));
    return Var{this, static_cast<NodeId>(nodes_.size() - 1)};
}

Var Tape::constant(Tensor value) {
    Node node;
    node.owned = std::move(value);
    return push(std::move(node));
}

Var Tape::parameter(const ParameterSet& params, std::size_t index) {
    if (bound_params_ && bound_params_ != &params) {
        throw ContractError("a tape can only bind parameters from one ParameterSet");
    }
    bound_params_ = &params;
    if (auto it = param_nodes_.find(index); it != param_nodes_.end()) {
        return Var{this, it->second};
    }
    Node node;
    node.external = &params[index];
    node.requires_grad = true;
    Var v = push(std::move(node));
    param_nodes_.emplace(index, v.id);
    return v;
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, BackwardFn backward) {
    return record(std::move(value), std::vector<Var>(inputs), std::move(backward));
}

Var Tape::record(Tensor value, const std::vector<Var>& inputs, BackwardFn backward) {
    Node node;
    node.owned = std::move(value);
    for (const Var& in : inputs) {
        if (in.tape != this) throw ContractError("operand recorded on a different tape");
        node.requires_grad = node.requires_grad || nodes_[in.id].requires_grad;
    }
    if (node.requires_grad) node.backward = std::move(backward);
    return push(std::move(node));
}

const Tensor& Tape::value(NodeId id) const {
    const Node& n = nodes_[id];
    return n.external ? *n.external : n.owned;
}

Tensor& Tape::grad(NodeId id) {
    Node& n = nodes_[id];
    if (n.grad.empty() && n.value_size != 0) n.grad = zeros_like(value(id));
    return n.grad;
}

void Tape::backward(Var loss) {
    if (loss.tape != this) throw ContractError("loss recorded on a different tape");
    if (value(loss.id).size() != 1) {
        throw ContractError("backward() needs a scalar loss, got shape " +
                            value(loss.id).shape_string());
    }
    for (auto& n : nodes_) n.grad = Tensor{};
    grad(loss.id)[0] = 1.0;
    for (NodeId id = loss.id + 1; id-- > 0;) {
        Node& n = nodes_[id];
        if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
        n.backward(*this, id);
    }
}

Gradients Tape::parameter_gradients(const ParameterSet& params) const {
    Gradients out(params);
    if (bound_params_ != &params) return out;
    for (const auto& [index, node] : param_nodes_) {
        const Tensor& g = nodes_[node].grad;
        if (!g.empty()) out[index] = g;
    }
    return out;
}

const Tensor* Tape::parameter_storage(std::size_t param_index) const {
    auto it = param_nodes_.find(param_index);
    return it == param_nodes_.end() ? nullptr : nodes_[it->second].external;
}

}  // namespace eglom::ad
