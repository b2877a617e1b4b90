#include "eglom/autodiff/ops.hpp"

#include <algorithm>
#include <cmath>

namespace eglom::ad {

namespace {

void require_same_tape(Var a, Var b) {
    if (a.tape != b.tape || a.tape == nullptr) {
        throw ContractError("operands belong to different tapes");
    }
}

void require_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw DimensionError(std::string(op) + ": shape " + a.shape_string() + " vs " +
                             b.shape_string());
    }
}

Tensor matrix_of(std::size_t rows, std::size_t cols) { return Tensor::matrix(rows, cols); }

}  // namespace

Var matmul(Var a, Var b) {
    require_same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.cols() != bv.rows()) {
        throw DimensionError("matmul: inner extents differ, " + av.shape_string() + " x " +
                             bv.shape_string());
    }
    Tensor out = matrix_of(av.rows(), bv.cols());
    out.mat().noalias() = av.mat() * bv.mat();
    const NodeId ia = a.id, ib = b.id;
    return a.tape->record(std::move(out), {a, b}, [ia, ib](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(ia)) t.grad(ia).mat().noalias() += g.mat() * t.value(ib).mat().transpose();
        if (t.requires_grad(ib)) t.grad(ib).mat().noalias() += t.value(ia).mat().transpose() * g.mat();
    });
}

Var affine(Var x, Var w, Var b) {
    require_same_tape(x, w);
    require_same_tape(x, b);
    const Tensor& xv = x.value();
    const Tensor& wv = w.value();
    const Tensor& bv = b.value();
    if (xv.cols() != wv.rows()) {
        throw DimensionError("affine: input width " + std::to_string(xv.cols()) +
                             " does not match weight " + wv.shape_string());
    }
    if (bv.size() != wv.cols()) {
        throw DimensionError("affine: bias " + bv.shape_string() + " vs weight " +
                             wv.shape_string());
    }
    Tensor out = matrix_of(xv.rows(), wv.cols());
    out.mat().noalias() = xv.mat() * wv.mat();
    out.mat().rowwise() += Eigen::Map<const Eigen::RowVectorXd>(bv.data(), Eigen::Index(bv.size()));
    const NodeId ix = x.id, iw = w.id, ib = b.id;
    return x.tape->record(std::move(out), {x, w, b}, [ix, iw, ib](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(ix)) t.grad(ix).mat().noalias() += g.mat() * t.value(iw).mat().transpose();
        if (t.requires_grad(iw)) t.grad(iw).mat().noalias() += t.value(ix).mat().transpose() * g.mat();
        if (t.requires_grad(ib)) {
            Tensor& gb = t.grad(ib);
            Eigen::Map<Eigen::RowVectorXd>(gb.data(), Eigen::Index(gb.size())) +=
                g.mat().colwise().sum();
        }
    });
}

Var relu(Var x) {
    const Tensor& xv = x.value();
    Tensor out = zeros_like(xv);
    for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : 0.0;
    const NodeId ix = x.id;
    return x.tape->record(std::move(out), {x}, [ix](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        const Tensor& xv = t.value(ix);
        Tensor& gx = t.grad(ix);
        for (std::size_t i = 0; i < g.size(); ++i) {
            if (xv[i] > 0.0) gx[i] += g[i];
        }
    });
}

Var add(Var a, Var b) { return lincomb({{1.0, a}, {1.0, b}}); }

Var sub(Var a, Var b) { return lincomb({{1.0, a}, {-1.0, b}}); }

Var scale(Var x, double factor) { return lincomb({{factor, x}}); }

Var lincomb(const std::vector<std::pair<double, Var>>& terms) {
    if (terms.empty()) throw ContractError("lincomb of zero terms");
    Tape* tape = terms.front().second.tape;
    const Tensor& first = terms.front().second.value();
    Tensor out = zeros_like(first);
    std::vector<Var> inputs;
    std::vector<std::pair<double, NodeId>> rules;
    inputs.reserve(terms.size());
    rules.reserve(terms.size());
    for (const auto& [c, v] : terms) {
        require_same_tape(terms.front().second, v);
        require_same_shape(first, v.value(), "lincomb");
        out.mat() += c * v.value().mat();
        inputs.push_back(v);
        rules.emplace_back(c, v.id);
    }
    return tape->record(std::move(out), inputs, [rules = std::move(rules)](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        for (const auto& [c, id] : rules) {
            if (t.requires_grad(id)) t.grad(id).mat() += c * g.mat();
        }
    });
}

Var concat_cols(Var a, Var b) {
    require_same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    if (av.rows() != bv.rows()) {
        throw DimensionError("concat_cols: row counts " + std::to_string(av.rows()) + " vs " +
                             std::to_string(bv.rows()));
    }
    const auto ca = Eigen::Index(av.cols()), cb = Eigen::Index(bv.cols());
    Tensor out = matrix_of(av.rows(), av.cols() + bv.cols());
    out.mat().leftCols(ca) = av.mat();
    out.mat().rightCols(cb) = bv.mat();
    const NodeId ia = a.id, ib = b.id;
    return a.tape->record(std::move(out), {a, b}, [ia, ib, ca, cb](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        if (t.requires_grad(ia)) t.grad(ia).mat() += g.mat().leftCols(ca);
        if (t.requires_grad(ib)) t.grad(ib).mat() += g.mat().rightCols(cb);
    });
}

Var slice_cols(Var x, std::size_t begin, std::size_t count) {
    const Tensor& xv = x.value();
    if (begin + count > xv.cols()) {
        throw DimensionError("slice_cols: [" + std::to_string(begin) + ", " +
                             std::to_string(begin + count) + ") outside " + xv.shape_string());
    }
    Tensor out = matrix_of(xv.rows(), count);
    out.mat() = xv.mat().middleCols(Eigen::Index(begin), Eigen::Index(count));
    const NodeId ix = x.id;
    return x.tape->record(std::move(out), {x}, [ix, begin, count](Tape& t, NodeId self) {
        t.grad(ix).mat().middleCols(Eigen::Index(begin), Eigen::Index(count)) += t.grad(self).mat();
    });
}

Var softmax_rows(Var z, double scale) {
    const Tensor& zv = z.value();
    if (zv.size() == 0) throw ContractError("softmax of an empty tensor");
    Tensor out = zeros_like(zv);
    for (std::size_t r = 0; r < zv.rows(); ++r) {
        const auto p = softmax(zv.row(r), scale);
        std::copy(p.begin(), p.end(), out.row(r).begin());
    }
    const NodeId iz = z.id;
    return z.tape->record(std::move(out), {z}, [iz, scale](Tape& t, NodeId self) {
        const Tensor& g = t.grad(self);
        const Tensor& p = t.value(self);
        Tensor& gz = t.grad(iz);
        for (std::size_t r = 0; r < p.rows(); ++r) {
            const auto pr = p.row(r);
            const auto gr = g.row(r);
            double dot = 0.0;
            for (std::size_t j = 0; j < pr.size(); ++j) dot += pr[j] * gr[j];
            auto out = gz.row(r);
            for (std::size_t j = 0; j < pr.size(); ++j) out[j] += scale * pr[j] * (gr[j] - dot);
        }
    });
}

Var sum(Var x) {
    const Tensor& xv = x.value();
    Tensor out = Tensor::scalar(xv.mat().sum());
    const NodeId ix = x.id;
    return x.tape->record(std::move(out), {x}, [ix](Tape& t, NodeId self) {
        t.grad(ix).mat().array() += t.grad(self)[0];
    });
}

Var mean(Var x) {
    const std::size_t n = x.value().size();
    if (n == 0) throw ContractError("mean of an empty tensor");
    return scale(sum(x), 1.0 / static_cast<double>(n));
}

Var mse(Var pred, const Tensor& target) {
    const Tensor& pv = pred.value();
    require_same_shape(pv, target, "mse");
    if (pv.size() == 0) throw ContractError("mse of an empty tensor");
    Tensor diff = zeros_like(pv);
    diff.mat() = pv.mat() - target.mat();
    const double n = static_cast<double>(pv.size());
    Tensor out = Tensor::scalar(diff.mat().squaredNorm() / n);
    const NodeId ip = pred.id;
    return pred.tape->record(std::move(out), {pred},
                             [ip, diff = std::move(diff), n](Tape& t, NodeId self) {
                                 t.grad(ip).mat() += (2.0 * t.grad(self)[0] / n) * diff.mat();
                             });
}

Var softmax_cross_entropy(Var logits, std::span<const int> labels) {
    const Tensor& lv = logits.value();
    if (labels.size() != lv.rows()) {
        throw DimensionError("softmax_cross_entropy: " + std::to_string(labels.size()) +
                             " labels for " + std::to_string(lv.rows()) + " rows");
    }
    if (lv.rows() == 0) throw ContractError("cross-entropy over zero rows");
    Tensor probs = zeros_like(lv);
    double total = 0.0;
    for (std::size_t r = 0; r < lv.rows(); ++r) {
        const int label = labels[r];
        if (label < 0 || std::size_t(label) >= lv.cols()) {
            throw ContractError("class label " + std::to_string(label) + " out of range");
        }
        const auto row = lv.row(r);
        const double hi = *std::max_element(row.begin(), row.end());
        double z = 0.0;
        for (double v : row) z += std::exp(v - hi);
        const double log_z = hi + std::log(z);
        total += log_z - row[std::size_t(label)];
        auto pr = probs.row(r);
        for (std::size_t j = 0; j < row.size(); ++j) pr[j] = std::exp(row[j] - log_z);
    }
    const double n = static_cast<double>(lv.rows());
    std::vector<int> owned(labels.begin(), labels.end());
    const NodeId il = logits.id;
    return logits.tape->record(
        Tensor::scalar(total / n), {logits},
        [il, probs = std::move(probs), owned = std::move(owned), n](Tape& t, NodeId self) {
            const double g = t.grad(self)[0] / n;
            Tensor& gl = t.grad(il);
            for (std::size_t r = 0; r < probs.rows(); ++r) {
                const auto pr = probs.row(r);
                auto out = gl.row(r);
                for (std::size_t j = 0; j < pr.size(); ++j) {
                    out[j] += g * (pr[j] - (int(j) == owned[r] ? 1.0 : 0.0));
                }
            }
        });
}

Var cosine_distance_rows(Var a, Var b) {
    require_same_tape(a, b);
    const Tensor& av = a.value();
    const Tensor& bv = b.value();
    require_same_shape(av, bv, "cosine_distance_rows");
    const std::size_t rows = av.rows();
    if (rows == 0) throw ContractError("cosine distance over zero rows");
    std::vector<double> na(rows), nb(rows), cosv(rows);
    double total = 0.0;
    for (std::size_t r = 0; r < rows; ++r) {
        const auto ar = av.mat().row(Eigen::Index(r));
        const auto br = bv.mat().row(Eigen::Index(r));
        na[r] = ar.norm();
        nb[r] = br.norm();
        if (na[r] == 0.0 || nb[r] == 0.0) continue;
        cosv[r] = ar.dot(br) / (na[r] * nb[r]);
        total += 1.0 - cosv[r];
    }
    const double n = static_cast<double>(rows);
    const NodeId ia = a.id, ib = b.id;
    return a.tape->record(
        Tensor::scalar(total / n), {a, b},
        [ia, ib, na = std::move(na), nb = std::move(nb), cosv = std::move(cosv), n](Tape& t,
                                                                                   NodeId self) {
            const double g = t.grad(self)[0] / n;
            const auto& av = t.value(ia).mat();
            const auto& bv = t.value(ib).mat();
            for (std::size_t r = 0; r < na.size(); ++r) {
                if (na[r] == 0.0 || nb[r] == 0.0) continue;
                const auto R = Eigen::Index(r);
                // d cos / d a = b / (|a||b|) - cos * a / |a|^2
                if (t.requires_grad(ia)) {
                    t.grad(ia).mat().row(R) -=
                        g * (bv.row(R) / (na[r] * nb[r]) - cosv[r] * av.row(R) / (na[r] * na[r]));
                }
                if (t.requires_grad(ib)) {
                    t.grad(ib).mat().row(R) -=
                        g * (av.row(R) / (na[r] * nb[r]) - cosv[r] * bv.row(R) / (nb[r] * nb[r]));
                }
            }
        });
}

}  // namespace eglom::ad
