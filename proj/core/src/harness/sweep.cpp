#include "eglom/harness/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <iomanip>
#include <map>
#include <thread>

namespace eglom::harness {

std::vector<SweepRow> sweep(const RunConfig& cfg, const world::Dataset& train_set,
                            const world::Dataset& val_set) {
    cfg.validate();
    if (cfg.axis.empty()) throw ConfigError("sweep needs an axis");

    struct Job {
        RunConfig cfg;
        SweepRow row;
    };
    std::vector<Job> jobs;
    for (const std::string& value : cfg.values) {
        for (std::size_t k = 0; k < cfg.seeds; ++k) {
            Job j{cfg, {}};
            apply_axis(j.cfg, cfg.axis, value);
            j.cfg.axis.clear();
            j.cfg.values.clear();
            j.cfg.seed = cfg.seed + k;
            j.cfg.threads = 1;
            j.row.axis = cfg.axis;
            j.row.value = value;
            j.row.seed = j.cfg.seed;
            j.row.run_id = cfg.axis + "=" + value + "/seed=" + std::to_string(j.cfg.seed);
            if (!cfg.output_dir.empty()) {
                j.cfg.output_dir = cfg.output_dir / (cfg.axis + "_" + value + "_seed" + std::to_string(j.cfg.seed));
            }
            j.cfg.validate();
            jobs.push_back(std::move(j));
        }
    }

    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(jobs.size());
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            try {
                const TrainResult r = train(jobs[i].cfg, train_set, val_set);
                jobs[i].row.metrics = r.history[r.best_epoch].validation;
                jobs[i].row.metrics.wall_s = r.wall_s;
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    {
        const std::size_t n = std::min<std::size_t>(cfg.worker_threads(), jobs.size());
        std::vector<std::jthread> pool;
        for (std::size_t w = 1; w < n; ++w) pool.emplace_back(worker);
        worker();
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    std::vector<SweepRow> rows;
    for (auto& j : jobs) rows.push_back(std::move(j.row));
    return rows;
}

void write_sweep_csv(const std::vector<SweepRow>& rows, std::ostream& out) {
    out << "run_id,axis,value,seed,whole_mse,part_mse,accuracy,island_sep,wall_s\n";
    out << std::setprecision(10);
    for (const auto& r : rows) {
        const auto& m = r.metrics;
        out << r.run_id << ',' << r.axis << ',' << r.value << ',' << r.seed << ',' << m.whole_mse << ','
            << m.part_mse << ',' << m.accuracy << ',';
        if (m.island_separation) out << *m.island_separation;
        out << ',' << m.wall_s << '\n';
    }
}

Interval bootstrap_mean(const std::vector<double>& samples, double level, std::size_t resamples,
                        std::uint64_t seed) {
    if (samples.empty()) throw std::invalid_argument("bootstrap of no samples");
    auto mean = [](const std::vector<double>& v) {
        double s = 0.0;
        for (double x : v) s += x;
        return s / double(v.size());
    };
    Interval out;
    out.mean = mean(samples);
    eglom::Rng rng(seed);
    std::vector<double> means(resamples);
    std::vector<double> draw(samples.size());
    for (auto& m : means) {
        for (auto& d : draw) d = samples[rng.index(samples.size())];
        m = mean(draw);
    }
    std::sort(means.begin(), means.end());
    const double tail = (1.0 - level) / 2.0;
    auto at = [&](double q) {
        const auto i = std::size_t(std::clamp(q * double(resamples - 1), 0.0, double(resamples - 1)));
        return means[i];
    };
    out.lo = at(tail);
    out.hi = at(1.0 - tail);
    return out;
}

std::vector<SweepSummary> summarize(const std::vector<SweepRow>& rows) {
    std::vector<std::string> order;
    std::map<std::string, std::vector<const SweepRow*>> by_value;
    for (const auto& r : rows) {
        if (!by_value.count(r.value)) order.push_back(r.value);
        by_value[r.value].push_back(&r);
    }
    std::vector<SweepSummary> out;
    for (const auto& value : order) {
        const auto& group = by_value[value];
        for (const char* metric : {"whole_mse", "part_mse", "accuracy"}) {
            std::vector<double> v;
            for (const SweepRow* r : group) {
                const std::string m = metric;
                v.push_back(m == "whole_mse" ? r->metrics.whole_mse
                            : m == "part_mse" ? r->metrics.part_mse
                                              : r->metrics.accuracy);
            }
            out.push_back({group.front()->axis, value, metric, v.size(), bootstrap_mean(v)});
        }
    }
    return out;
}

void write_summary_csv(const std::vector<SweepSummary>& summary, std::ostream& out) {
    out << "axis,value,metric,runs,mean,ci90_lo,ci90_hi\n";
    out << std::setprecision(10);
    for (const auto& s : summary) {
        out << s.axis << ',' << s.value << ',' << s.metric << ',' << s.runs << ',' << s.interval.mean
            << ',' << s.interval.lo << ',' << s.interval.hi << '\n';
    }
}

}  // namespace eglom::harness
