#include "eglom/harness/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <memory>
#include <numeric>
#include <thread>

namespace eglom::harness {

namespace {

using Clock = std::chrono::steady_clock;

/// The pieces of training that differ between the two model kinds.
class Trainable {
public:
    virtual ~Trainable() = default;
    virtual ad::ParameterSet& params() = 0;
    virtual const ad::ParameterSet& params() const = 0;
    /// Loss over `scenes`, weighted so that shard losses add up to the batch mean.
    virtual ad::Var shard_loss(ad::Tape& tape, std::span<const world::Scene* const> scenes,
                               double weight) const = 0;
    virtual MetricsRecord evaluate(const world::Dataset& data, unsigned threads) const = 0;
    virtual ad::Checkpoint checkpoint() const = 0;
};

class EglomTrainable final : public Trainable {
public:
    EglomTrainable(const net::HyperParams& hp, std::uint64_t seed) : model_(hp, seed) {}
    ad::ParameterSet& params() override { return model_.params(); }
    const ad::ParameterSet& params() const override { return model_.params(); }
    ad::Var shard_loss(ad::Tape& tape, std::span<const world::Scene* const> scenes,
                       double weight) const override {
        const net::Batch batch = net::make_batch(scenes, model_.hyper());
        const net::Trajectory traj = net::forward(tape, model_, batch);
        return ad::scale(net::loss_terms(traj, batch, model_.hyper()).total, weight);
    }
    MetricsRecord evaluate(const world::Dataset& data, unsigned threads) const override {
        return harness::evaluate(model_, data, threads);
    }
    ad::Checkpoint checkpoint() const override { return model_.to_checkpoint(); }

private:
    net::EglomModel model_;
};

class BaselineTrainable final : public Trainable {
public:
    BaselineTrainable(const baseline::BaselineSpec& spec, std::uint64_t seed) : model_(spec, seed) {}
    ad::ParameterSet& params() override { return model_.params(); }
    const ad::ParameterSet& params() const override { return model_.params(); }
    ad::Var shard_loss(ad::Tape& tape, std::span<const world::Scene* const> scenes,
                       double weight) const override {
        const baseline::BaselineBatch batch = baseline::make_batch(scenes, model_.spec());
        const baseline::BaselineOutput out = baseline::baseline_forward(tape, model_, batch);
        return ad::scale(baseline::baseline_loss(out, batch), weight);
    }
    MetricsRecord evaluate(const world::Dataset& data, unsigned threads) const override {
        return harness::evaluate(model_, data, threads);
    }
    ad::Checkpoint checkpoint() const override { return model_.to_checkpoint(); }

private:
    baseline::BaselineModel model_;
};

std::unique_ptr<Trainable> make_trainable(const RunConfig& cfg) {
    if (cfg.model == ModelKind::eglom) return std::make_unique<EglomTrainable>(cfg.model_hyper(), cfg.seed);
    return std::make_unique<BaselineTrainable>(cfg.baseline_spec(), cfg.seed);
}

struct ShardResult {
    double loss = 0.0;
    ad::Gradients grads;
    std::exception_ptr error;
};

void run_shard(const Trainable& model, std::span<const world::Scene* const> scenes, double weight,
               ShardResult& out) {
    try {
        ad::Tape tape;
        ad::Var loss = model.shard_loss(tape, scenes, weight);
        out.loss = loss.value().item();
        tape.backward(loss);
        out.grads = tape.parameter_gradients(model.params());
    } catch (...) {
        out.error = std::current_exception();
    }
}

void stamp(ad::Checkpoint& c, const RunConfig& cfg, std::size_t epoch) {
    for (const auto& [k, v] : cfg.to_map()) c.meta.emplace("run." + k, v);
    c.meta["epoch"] = std::to_string(epoch);
}

}  // namespace

TrainResult train(const RunConfig& cfg, const world::Dataset& train_set,
                  const world::Dataset& val_set, const EpochCallback& on_epoch) {
    cfg.validate();
    if (train_set.scenes.empty()) throw ConfigError("training set is empty");
    if (train_set.task != cfg.task || val_set.task != cfg.task) {
        throw ConfigError("dataset task does not match configured task " +
                          std::string(world::task_name(cfg.task)));
    }
    const auto start = Clock::now();
    const unsigned threads = cfg.worker_threads();
    std::unique_ptr<Trainable> model = make_trainable(cfg);
    ad::AdamState adam(cfg.optimizer, model->params());
    eglom::Rng shuffle_rng(cfg.seed ^ 0x5eed5eed5eedULL);

    const bool write = !cfg.output_dir.empty();
    if (write) std::filesystem::create_directories(cfg.output_dir);
    std::ofstream log;
    if (write) {
        log.open(cfg.output_dir / "metrics.csv");
        write_history_header(log);
    }

    TrainResult result;
    double best_loss = 0.0;
    auto record_epoch = [&](std::size_t epoch, double train_loss) {
        EpochRecord rec;
        rec.epoch = epoch;
        rec.train_loss = train_loss;
        rec.validation = model->evaluate(val_set, threads);
        result.history.push_back(rec);
        const double vl = rec.validation.loss.value_or(0.0);
        if (epoch == 0 || vl < best_loss) {
            best_loss = vl;
            result.best_epoch = epoch;
            result.best = model->checkpoint();
            result.best.optimizer = adam;
            stamp(result.best, cfg, epoch);
            if (write) ad::save_checkpoint(result.best, cfg.output_dir / "best.ckpt");
        }
        if (write) {
            write_history_row(rec, log);
            log.flush();
        }
        if (on_epoch) on_epoch(rec);
    };
    record_epoch(0, 0.0);

    std::vector<std::size_t> order(train_set.scenes.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        for (std::size_t i = order.size(); i > 1; --i) {
            std::swap(order[i - 1], order[shuffle_rng.index(i)]);
        }
        double loss_sum = 0.0;
        std::size_t steps = 0;
        for (std::size_t b = 0; b < order.size(); b += cfg.batch_size) {
            const std::size_t e = std::min(order.size(), b + cfg.batch_size);
            std::vector<const world::Scene*> batch;
            for (std::size_t i = b; i < e; ++i) batch.push_back(&train_set.scenes[order[i]]);
            const std::size_t shards = std::min(cfg.shards, batch.size());
            std::vector<ShardResult> results(shards);
            auto shard_span = [&](std::size_t s) {
                const std::size_t lo = batch.size() * s / shards;
                const std::size_t hi = batch.size() * (s + 1) / shards;
                return std::span<const world::Scene* const>(batch.data() + lo, hi - lo);
            };
            auto work = [&](std::size_t s) {
                const auto span = shard_span(s);
                run_shard(*model, span, double(span.size()) / double(batch.size()), results[s]);
            };
            if (threads <= 1 || shards == 1) {
                for (std::size_t s = 0; s < shards; ++s) work(s);
            } else {
                std::vector<std::jthread> pool;
                const std::size_t workers = std::min<std::size_t>(threads, shards);
                for (std::size_t w = 0; w < workers; ++w) {
                    pool.emplace_back([&, w] {
                        for (std::size_t s = w; s < shards; s += workers) work(s);
                    });
                }
            }
            double loss = 0.0;
            ad::Gradients grads(model->params());
            std::string failure;
            for (auto& r : results) {
                if (r.error) {
                    try {
                        std::rethrow_exception(r.error);
                    } catch (const net::NonFiniteError& err) {
                        failure = err.what();
                    }
                    if (!failure.empty()) break;
                }
                loss += r.loss;
                grads += r.grads;
            }
            if (failure.empty() && (!std::isfinite(loss) || !grads.all_finite())) {
                failure = "non-finite loss or gradient";
            }
            if (!failure.empty()) {
                ad::Checkpoint last = model->checkpoint();
                last.optimizer = adam;
                stamp(last, cfg, epoch);
                if (write) ad::save_checkpoint(last, cfg.output_dir / "last_good.ckpt");
                throw TrainingError("training aborted at epoch " + std::to_string(epoch) + ", step " +
                                        std::to_string(steps) + ": " + failure,
                                    std::move(last));
            }
            ad::adam_update(adam, model->params(), grads, epoch - 1);
            loss_sum += loss;
            ++steps;
        }
        record_epoch(epoch, steps ? loss_sum / double(steps) : 0.0);
    }
    result.wall_s = std::chrono::duration<double>(Clock::now() - start).count();
    return result;
}

void write_history_header(std::ostream& out) {
    out << "epoch,train_loss,val_loss,whole_mse,part_mse,accuracy,island_sep,wall_s\n";
}

void write_history_row(const EpochRecord& r, std::ostream& out) {
    const auto& m = r.validation;
    out << std::setprecision(10) << r.epoch << ',' << r.train_loss << ',';
    if (m.loss) out << *m.loss;
    out << ',' << m.whole_mse << ',' << m.part_mse << ',' << m.accuracy << ',';
    if (m.island_separation) out << *m.island_separation;
    out << ',' << m.wall_s << '\n';
}

void write_history_csv(const std::vector<EpochRecord>& history, std::ostream& out) {
    write_history_header(out);
    for (const auto& r : history) write_history_row(r, out);
}

MetricsRecord evaluate_checkpoint(const ad::Checkpoint& ckpt, const world::Dataset& data,
                                  unsigned threads) {
    if (ckpt.kind == "baseline") {
        return evaluate(baseline::BaselineModel::from_checkpoint(ckpt), data, threads);
    }
    return evaluate(net::EglomModel::from_checkpoint(ckpt), data, threads);
}

Predictions predict_checkpoint(const ad::Checkpoint& ckpt, std::span<const world::Scene> scenes,
                               unsigned threads) {
    if (ckpt.kind == "baseline") {
        return predict(baseline::BaselineModel::from_checkpoint(ckpt), scenes, threads);
    }
    return predict(net::EglomModel::from_checkpoint(ckpt), scenes, threads);
}

}  // namespace eglom::harness
