#include "eglom/harness/evaluate.hpp"

#include "eglom/analysis/islands.hpp"
#include "eglom/harness/config.hpp"

#include <chrono>
#include <cmath>
#include <stdexcept>
#include <thread>

namespace eglom::harness {

namespace {

std::vector<std::size_t> scene_offsets(std::span<const world::Scene> scenes) {
    std::vector<std::size_t> off{0};
    for (const auto& s : scenes) off.push_back(off.back() + s.size());
    return off;
}

/// Runs `work(begin, end)` over scene chunks on up to `threads` workers. Each
/// chunk writes disjoint rows, so the result does not depend on scheduling.
template <class Work>
void for_chunks(std::size_t n, std::size_t chunk, unsigned threads, Work work) {
    const std::size_t chunks = (n + chunk - 1) / chunk;
    auto run = [&](std::size_t first, std::size_t stride) {
        for (std::size_t c = first; c < chunks; c += stride) {
            work(c * chunk, std::min(n, (c + 1) * chunk));
        }
    };
    const std::size_t workers = std::min<std::size_t>(std::max(1u, threads), chunks);
    if (workers <= 1) {
        run(0, 1);
        return;
    }
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                try {
                    run(w, workers);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

void copy_rows(const ad::Tensor& src, ad::Tensor& dst, std::size_t first_row) {
    std::copy(src.storage().begin(), src.storage().end(),
              dst.storage().begin() + std::ptrdiff_t(first_row * dst.cols()));
}

ad::Tensor softmax_rows(const ad::Tensor& logits) {
    ad::Tensor p = zeros_like(logits);
    for (std::size_t r = 0; r < logits.rows(); ++r) {
        const auto row = ad::softmax(logits.row(r));
        std::copy(row.begin(), row.end(), p.row(r).begin());
    }
    return p;
}

}  // namespace

void check_compatible(const net::EglomModel& model, world::Task task) {
    if (model.hyper().class_count != world::class_count(task)) {
        throw ConfigError("model predicts " + std::to_string(model.hyper().class_count) +
                          " classes but task " + std::string(world::task_name(task)) + " has " +
                          std::to_string(world::class_count(task)));
    }
}

void check_compatible(const baseline::BaselineModel& model, world::Task task) {
    if (model.spec().classes != world::class_count(task) ||
        model.spec().objects != world::objects_per_scene(task)) {
        throw ConfigError("baseline layout does not match task " + std::string(world::task_name(task)));
    }
}

Predictions predict(const net::EglomModel& model, std::span<const world::Scene> scenes,
                    unsigned threads, std::size_t chunk) {
    const auto& hp = model.hyper();
    Predictions p;
    p.offsets = scene_offsets(scenes);
    const std::size_t R = p.offsets.back();
    p.reconstruction = ad::Tensor::matrix(R, 6);
    p.per_iteration.assign(hp.iterations, ad::Tensor::matrix(R, 6));
    p.pose = ad::Tensor::matrix(R, 6);
    p.probabilities = ad::Tensor::matrix(R, hp.class_count);
    p.object_embedding = ad::Tensor::matrix(R, hp.embedding_dim);
    std::vector<double> chunk_loss((scenes.size() + chunk - 1) / chunk, 0.0);
    for_chunks(scenes.size(), chunk, threads, [&](std::size_t b, std::size_t e) {
        std::vector<const world::Scene*> ptrs;
        for (std::size_t i = b; i < e; ++i) ptrs.push_back(&scenes[i]);
        const net::Batch batch = net::make_batch(std::span<const world::Scene* const>(ptrs), hp);
        ad::Tape tape;
        const net::Trajectory traj = net::forward(tape, model, batch);
        const std::size_t row0 = p.offsets[b];
        for (std::size_t t = 0; t < hp.iterations; ++t) {
            copy_rows(traj.reconstructions[t].value(), p.per_iteration[t], row0);
        }
        copy_rows(traj.reconstructions.back().value(), p.reconstruction, row0);
        copy_rows(traj.pose.value(), p.pose, row0);
        copy_rows(softmax_rows(traj.logits.value()), p.probabilities, row0);
        copy_rows(traj.states.back().object.value(), p.object_embedding, row0);
        const net::LossTerms l = net::loss_terms(traj, batch, hp);
        chunk_loss[b / chunk] = l.total.value().item() * double(e - b);
    });
    for (double l : chunk_loss) p.loss += l;
    p.loss /= double(std::max<std::size_t>(1, scenes.size()));
    return p;
}

Predictions predict(const baseline::BaselineModel& model, std::span<const world::Scene> scenes,
                    unsigned threads, std::size_t chunk) {
    const auto& spec = model.spec();
    Predictions p;
    p.offsets = scene_offsets(scenes);
    const std::size_t R = p.offsets.back();
    p.reconstruction = ad::Tensor::matrix(R, 6);
    p.pose = ad::Tensor::matrix(R, 6);
    p.probabilities = ad::Tensor::matrix(R, spec.classes);
    std::vector<double> chunk_loss((scenes.size() + chunk - 1) / chunk, 0.0);
    for_chunks(scenes.size(), chunk, threads, [&](std::size_t b, std::size_t e) {
        std::vector<const world::Scene*> ptrs;
        for (std::size_t i = b; i < e; ++i) ptrs.push_back(&scenes[i]);
        const baseline::BaselineBatch batch =
            baseline::make_batch(std::span<const world::Scene* const>(ptrs), spec);
        ad::Tape tape;
        const baseline::BaselineOutput out = baseline::baseline_forward(tape, model, batch);
        const ad::Tensor& rec = out.reconstruction.value();
        const ad::Tensor& pose = out.pose.value();
        const ad::Tensor probs = softmax_rows(out.logits.value());
        for (std::size_t s = b; s < e; ++s) {
            for (std::size_t i = 0; i < scenes[s].size(); ++i) {
                const std::size_t row = p.offsets[s] + i;
                const std::size_t obj = (s - b) * spec.objects + i / world::kPartsPerObject;
                for (std::size_t k = 0; k < 6; ++k) {
                    p.reconstruction(row, k) = rec(s - b, 6 * i + k);
                    p.pose(row, k) = pose(obj, k);
                }
                for (std::size_t k = 0; k < spec.classes; ++k) p.probabilities(row, k) = probs(obj, k);
            }
        }
        chunk_loss[b / chunk] = baseline::baseline_loss(out, batch).value().item() * double(e - b);
    });
    p.per_iteration = {p.reconstruction};
    for (double l : chunk_loss) p.loss += l;
    p.loss /= double(std::max<std::size_t>(1, scenes.size()));
    return p;
}

MetricsRecord metrics_from(const Predictions& preds, std::span<const world::Scene> scenes,
                           const LocationFilter& keep) {
    if (preds.offsets.size() != scenes.size() + 1) {
        throw std::invalid_argument("predictions do not belong to these scenes");
    }
    MetricsRecord m;
    m.part_mse_by_iteration.assign(preds.per_iteration.size(), 0.0);
    double whole = 0.0, part = 0.0, correct = 0.0;
    double island_sum = 0.0;
    std::size_t island_count = 0;
    const bool embeddings = !preds.object_embedding.empty();
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        const world::Scene& scene = scenes[s];
        bool any = false;
        for (std::size_t i = 0; i < scene.size(); ++i) {
            if (keep && !keep(s, i)) continue;
            any = true;
            const std::size_t row = preds.offsets[s] + i;
            const world::ObjectSymbol obj = scene.object_symbol(i);
            const auto truth = scene.locations[i].truth.to_array();
            for (std::size_t k = 0; k < 6; ++k) {
                whole += std::pow(preds.pose(row, k) - obj.pose[k], 2);
                part += std::pow(preds.reconstruction(row, k) - truth[k], 2);
                for (std::size_t t = 0; t < preds.per_iteration.size(); ++t) {
                    m.part_mse_by_iteration[t] += std::pow(preds.per_iteration[t](row, k) - truth[k], 2);
                }
            }
            const auto probs = preds.probabilities.row(row);
            const auto best = std::size_t(std::max_element(probs.begin(), probs.end()) - probs.begin());
            if (int(best) == obj.class_index) correct += 1.0;
            ++m.locations;
        }
        if (!any) continue;
        ++m.scenes;
        if (embeddings && scene.objects.size() >= 2) {
            ad::Tensor e = ad::Tensor::matrix(scene.size(), preds.object_embedding.cols());
            std::vector<int> labels;
            for (std::size_t i = 0; i < scene.size(); ++i) {
                const auto src = preds.object_embedding.row(preds.offsets[s] + i);
                std::copy(src.begin(), src.end(), e.row(i).begin());
                labels.push_back(scene.locations[i].instance);
            }
            if (const auto sep = analysis::island_separation(e, labels)) {
                island_sum += *sep;
                ++island_count;
            }
        }
    }
    if (m.locations == 0) throw std::invalid_argument("no locations to evaluate");
    const double n = double(m.locations) * 6.0;
    m.whole_mse = whole / n;
    m.part_mse = part / n;
    m.accuracy = correct / double(m.locations);
    for (double& v : m.part_mse_by_iteration) v /= n;
    if (island_count > 0) m.island_separation = island_sum / double(island_count);
    return m;
}

MetricsRecord evaluate(const net::EglomModel& model, const world::Dataset& data, unsigned threads) {
    check_compatible(model, data.task);
    if (data.scenes.empty()) throw std::invalid_argument("cannot evaluate on an empty dataset");
    const auto start = std::chrono::steady_clock::now();
    const Predictions p = predict(model, data.scenes, threads);
    MetricsRecord m = metrics_from(p, data.scenes);
    m.loss = p.loss;
    m.parameter_count = model.parameter_count();
    m.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return m;
}

MetricsRecord evaluate(const baseline::BaselineModel& model, const world::Dataset& data,
                       unsigned threads) {
    check_compatible(model, data.task);
    if (data.scenes.empty()) throw std::invalid_argument("cannot evaluate on an empty dataset");
    const auto start = std::chrono::steady_clock::now();
    const Predictions p = predict(model, data.scenes, threads);
    MetricsRecord m = metrics_from(p, data.scenes);
    m.loss = p.loss;
    m.parameter_count = model.parameter_count();
    m.wall_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return m;
}

}  // namespace eglom::harness
