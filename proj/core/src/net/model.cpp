#include "eglom/net/model.hpp"

#include <cmath>
#include <numbers>

namespace eglom::net {

namespace {

constexpr const char* kKind = "eglom";

Tensor rows_of(std::size_t rows, std::size_t cols) { return Tensor::matrix(rows, cols); }

void check_finite(const Var& v, const char* level, std::size_t t) {
    const Tensor& x = v.value();
    for (std::size_t r = 0; r < x.rows(); ++r) {
        for (double e : x.row(r)) {
            if (!std::isfinite(e)) throw NonFiniteError(r, level, t);
        }
    }
}

}  // namespace

std::vector<double> position_encoding(double x, double y, std::size_t frequencies) {
    std::vector<double> out;
    out.reserve(4 * frequencies);
    double f = std::numbers::pi;
    for (std::size_t k = 0; k < frequencies; ++k, f *= 2.0) {
        out.push_back(std::sin(f * x));
        out.push_back(std::cos(f * x));
        out.push_back(std::sin(f * y));
        out.push_back(std::cos(f * y));
    }
    return out;
}

Tensor attention_weights(const Tensor& e, double tau) {
    const std::size_t n = e.rows();
    Tensor scores = rows_of(n, n);
    scores.mat().noalias() = e.mat() * e.mat().transpose();
    Tensor w = rows_of(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        const auto p = ad::softmax(scores.row(i), tau);
        std::copy(p.begin(), p.end(), w.row(i).begin());
    }
    return w;
}

Tensor attention_average(const Tensor& e, double tau) {
    if (e.rows() == 0) throw ad::ContractError("attention over zero locations");
    const Tensor w = attention_weights(e, tau);
    Tensor out = rows_of(e.rows(), e.cols());
    out.mat().noalias() = w.mat() * e.mat();
    return out;
}

Var segmented_attention(Var e, std::span<const std::size_t> offsets, double tau) {
    const Tensor& ev = e.value();
    if (offsets.size() < 2 || offsets.front() != 0 || offsets.back() != ev.rows()) {
        throw ad::DimensionError("attention segments do not cover the embedding rows");
    }
    Tensor out = zeros_like(ev);
    std::vector<Tensor> weights;
    weights.reserve(offsets.size() - 1);
    for (std::size_t s = 0; s + 1 < offsets.size(); ++s) {
        const auto b = Eigen::Index(offsets[s]);
        const auto L = Eigen::Index(offsets[s + 1] - offsets[s]);
        if (L == 0) throw ad::ContractError("attention over an empty scene");
        Tensor seg = rows_of(std::size_t(L), ev.cols());
        seg.mat() = ev.mat().middleRows(b, L);
        Tensor w = attention_weights(seg, tau);
        out.mat().middleRows(b, L).noalias() = w.mat() * seg.mat();
        weights.push_back(std::move(w));
    }
    std::vector<std::size_t> bounds(offsets.begin(), offsets.end());
    const ad::NodeId ie = e.id;
    return e.tape->record(
        std::move(out), {e},
        [ie, tau, bounds = std::move(bounds), weights = std::move(weights)](Tape& t, ad::NodeId self) {
            const auto g = t.grad(self).mat();
            const auto x = t.value(ie).mat();
            auto gx = t.grad(ie).mat();
            for (std::size_t s = 0; s + 1 < bounds.size(); ++s) {
                const auto b = Eigen::Index(bounds[s]);
                const auto L = Eigen::Index(bounds[s + 1] - bounds[s]);
                const auto& P = weights[s].mat();
                const auto E = x.middleRows(b, L);
                const auto G = g.middleRows(b, L);
                ad::RowMatrix dP = G * E.transpose();
                const Eigen::VectorXd inner = (dP.array() * P.array()).rowwise().sum();
                ad::RowMatrix dS = tau * (P.array() * (dP.colwise() - inner).array()).matrix();
                gx.middleRows(b, L).noalias() += P.transpose() * G;
                gx.middleRows(b, L).noalias() += (dS + dS.transpose()) * E;
            }
        });
}

Batch make_batch(std::span<const world::Scene* const> scenes, const HyperParams& hp) {
    std::size_t rows = 0;
    for (const auto* s : scenes) rows += s->size();
    const std::size_t pw = hp.posenc_width();
    Batch b;
    b.symbols = rows_of(rows, 6);
    b.targets = rows_of(rows, 6);
    b.positions = rows_of(rows, pw);
    b.poses = rows_of(rows, 6);
    b.labels.reserve(rows);
    b.offsets.reserve(scenes.size() + 1);
    b.offsets.push_back(0);
    std::size_t r = 0;
    for (const auto* s : scenes) {
        if (s->size() == 0) throw ad::ContractError("scene without locations");
        for (std::size_t i = 0; i < s->size(); ++i, ++r) {
            const world::Location& loc = s->locations[i];
            const auto in = loc.input.to_array();
            const auto gt = loc.truth.to_array();
            const world::ObjectSymbol obj = s->object_symbol(i);
            for (std::size_t k = 0; k < 6; ++k) {
                b.symbols(r, k) = in[k];
                b.targets(r, k) = gt[k];
                b.poses(r, k) = obj.pose[k];
            }
            const auto pe = position_encoding(loc.cell_x / hp.position_extent,
                                              loc.cell_y / hp.position_extent, hp.posenc_frequencies);
            std::copy(pe.begin(), pe.end(), b.positions.row(r).begin());
            b.labels.push_back(obj.class_index);
        }
        b.offsets.push_back(r);
    }
    return b;
}

Batch make_batch(const std::vector<world::Scene>& scenes, const HyperParams& hp) {
    std::vector<const world::Scene*> ptrs;
    ptrs.reserve(scenes.size());
    for (const auto& s : scenes) ptrs.push_back(&s);
    return make_batch(std::span<const world::Scene* const>(ptrs), hp);
}

NonFiniteError::NonFiniteError(std::size_t row, std::string level, std::size_t iteration)
    : std::runtime_error("non-finite activation at " + level + " level, row " + std::to_string(row) +
                         ", iteration " + std::to_string(iteration)),
      row_(row),
      level_(std::move(level)),
      iteration_(iteration) {}

EglomModel::EglomModel(HyperParams hp) : hp_(std::move(hp)) { hp_.validate(); }

EglomModel::EglomModel(HyperParams hp, std::uint64_t seed) : EglomModel(std::move(hp)) {
    eglom::Rng rng(seed);
    bu0_ = ad::Mlp("bu0", symbol_encoder_spec(), params_, rng);
    bu1_ = ad::Mlp("bu1", part_encoder_spec(), params_, rng);
    bu2_ = ad::Mlp("bu2", object_head_spec(), params_, rng);
    td1_ = ad::Mlp("td1", part_decoder_spec(), params_, rng);
    td0_ = ad::Mlp("td0", symbol_decoder_spec(), params_, rng);
}

void EglomModel::bind() {
    bu0_ = ad::Mlp::bind("bu0", symbol_encoder_spec(), params_);
    bu1_ = ad::Mlp::bind("bu1", part_encoder_spec(), params_);
    bu2_ = ad::Mlp::bind("bu2", object_head_spec(), params_);
    td1_ = ad::Mlp::bind("td1", part_decoder_spec(), params_);
    td0_ = ad::Mlp::bind("td0", symbol_decoder_spec(), params_);
}

EglomModel EglomModel::from_checkpoint(const ad::Checkpoint& ckpt) {
    if (ckpt.kind != kKind) {
        throw ad::CheckpointError("checkpoint holds a '" + ckpt.kind + "' model, not eglom");
    }
    std::map<std::string, std::string> hp_values;
    for (const auto& [k, v] : ckpt.meta) {
        if (k.rfind("hp.", 0) == 0) hp_values.emplace(k.substr(3), v);
    }
    EglomModel m(HyperParams::from_map(hp_values));
    m.params_ = ckpt.params;
    m.bind();
    return m;
}

ad::Checkpoint EglomModel::to_checkpoint() const {
    ad::Checkpoint c;
    c.kind = kKind;
    for (const auto& [k, v] : hp_.to_map()) c.meta.emplace("hp." + k, v);
    c.params = params_;
    return c;
}

ad::MlpSpec EglomModel::symbol_encoder_spec() const {
    return {6, {32, 64}, hp_.embedding_dim};
}

ad::MlpSpec EglomModel::part_encoder_spec() const {
    const std::size_t in = hp_.embedding_dim + (hp_.bottom_up_position ? hp_.posenc_width() : 0);
    return {in, {hp_.embedding_dim}, hp_.embedding_dim};
}

ad::MlpSpec EglomModel::object_head_spec() const {
    return {hp_.embedding_dim, {64, 32}, 6 + hp_.class_count};
}

ad::MlpSpec EglomModel::part_decoder_spec() const {
    return {hp_.embedding_dim + hp_.posenc_width(), {hp_.decoder_dim, hp_.decoder_dim},
            hp_.embedding_dim};
}

ad::MlpSpec EglomModel::symbol_decoder_spec() const {
    return {hp_.embedding_dim + hp_.posenc_width(), hp_.symbol_decoder_hidden, 6};
}

std::size_t EglomModel::parameter_count(const HyperParams& hp) {
    const EglomModel shape_only(hp);
    return shape_only.symbol_encoder_spec().parameter_count() +
           shape_only.part_encoder_spec().parameter_count() +
           shape_only.object_head_spec().parameter_count() +
           shape_only.part_decoder_spec().parameter_count() +
           shape_only.symbol_decoder_spec().parameter_count();
}

ColumnState initial_state(Tape& tape, const EglomModel& model, const Batch& batch) {
    const std::size_t R = batch.rows();
    const std::size_t D = model.hyper().embedding_dim;
    ColumnState s;
    s.symbols = tape.constant(batch.symbols);
    s.ellipse = tape.constant(Tensor::matrix(R, D));
    s.object = tape.constant(Tensor::matrix(R, D));
    return s;
}

StepResult step(Tape& tape, const EglomModel& model, const Batch& batch, const ColumnState& state,
                std::size_t t, Var positions) {
    const HyperParams& hp = model.hyper();
    const ad::ParameterSet& P = model.params();
    const LevelWeights w1 = level1_weights(hp, t);
    const ObjectLevelWeights w2 = level2_weights(hp, t);

    // Level 1: ellipse embedding.
    std::vector<std::pair<double, Var>> terms{{w1.history, state.ellipse}};
    if (w1.bottom_up != 0.0) {
        terms.emplace_back(w1.bottom_up, model.symbol_encoder().forward(tape, P, state.symbols));
    }
    if (w1.top_down != 0.0) {
        Var td = state.part_from_object.valid()
                     ? state.part_from_object
                     : model.part_decoder().forward(tape, P, ad::concat_cols(state.object, positions));
        terms.emplace_back(w1.top_down, td);
    }
    Var ellipse = ad::lincomb(terms);
    check_finite(ellipse, "ellipse", t);

    // Level 2: object embedding. Attention reads the iteration-t embeddings.
    Var bu_in = hp.bottom_up_position ? ad::concat_cols(ellipse, positions) : ellipse;
    Var bottom_up = model.part_encoder().forward(tape, P, bu_in);
    std::vector<std::pair<double, Var>> obj_terms{{w2.history, state.object},
                                                  {w2.bottom_up, bottom_up}};
    if (w2.attention != 0.0) {
        obj_terms.emplace_back(w2.attention,
                               segmented_attention(state.object, batch.offsets, hp.attention_temperature));
    }
    Var object = ad::lincomb(obj_terms);
    check_finite(object, "object", t);

    // Level 0: keep-previous takes the history and bottom-up share.
    Var symbols = state.symbols;
    if (w1.top_down != 0.0) {
        Var decoded = model.symbol_decoder().forward(tape, P, ad::concat_cols(ellipse, positions));
        symbols = ad::lincomb({{w1.history + w1.bottom_up, state.symbols}, {w1.top_down, decoded}});
        check_finite(symbols, "symbol", t);
    }

    StepResult out;
    out.next.symbols = symbols;
    out.next.ellipse = ellipse;
    out.next.object = object;
    out.next.part_from_object =
        model.part_decoder().forward(tape, P, ad::concat_cols(object, positions));
    out.reconstruction =
        model.symbol_decoder().forward(tape, P, ad::concat_cols(out.next.part_from_object, positions));
    out.bottom_up = bottom_up;
    return out;
}

Trajectory forward(Tape& tape, const EglomModel& model, const Batch& batch) {
    if (batch.rows() == 0) throw ad::ContractError("forward on an empty batch");
    const HyperParams& hp = model.hyper();
    Var positions = tape.constant(batch.positions);
    Trajectory traj;
    traj.states.reserve(hp.iterations + 1);
    traj.states.push_back(initial_state(tape, model, batch));
    for (std::size_t t = 0; t < hp.iterations; ++t) {
        StepResult r = step(tape, model, batch, traj.states.back(), t, positions);
        traj.states.push_back(r.next);
        traj.reconstructions.push_back(r.reconstruction);
        traj.bottom_up_final = r.bottom_up;
    }
    Var head = model.object_head().forward(tape, model.params(), traj.states.back().object);
    traj.pose = ad::slice_cols(head, 0, 6);
    traj.logits = ad::slice_cols(head, 6, hp.class_count);
    return traj;
}

Var reconstruction_loss(const Trajectory& traj, const Batch& batch) {
    std::vector<std::pair<double, Var>> per_iter;
    const double w = 1.0 / double(traj.reconstructions.size());
    for (const Var& r : traj.reconstructions) per_iter.emplace_back(w, ad::mse(r, batch.targets));
    return ad::lincomb(per_iter);
}

Var object_loss(const Trajectory& traj, const Batch& batch, double class_weight) {
    Var pose = ad::mse(traj.pose, batch.poses);
    Var ce = ad::softmax_cross_entropy(traj.logits, batch.labels);
    return ad::lincomb({{1.0, pose}, {class_weight, ce}});
}

Var island_regularizer(const Trajectory& traj) {
    return ad::cosine_distance_rows(traj.bottom_up_final, traj.states.back().object);
}

Var total_loss(Var reconstruction, Var object, Var regularizer, const HyperParams& hp) {
    return ad::lincomb({{hp.lambda_reconstruction, reconstruction},
                        {hp.lambda_object, object},
                        {hp.lambda_regularizer, regularizer}});
}

LossTerms loss_terms(const Trajectory& traj, const Batch& batch, const HyperParams& hp) {
    LossTerms l;
    l.reconstruction = reconstruction_loss(traj, batch);
    l.object = object_loss(traj, batch, hp.class_loss_weight);
    l.regularizer = island_regularizer(traj);
    l.total = total_loss(l.reconstruction, l.object, l.regularizer, hp);
    return l;
}

}  // namespace eglom::net
