#include "cli.hpp"

#include "eglom/analysis/embeddings.hpp"
#include "eglom/harness/interpolation.hpp"
#include "eglom/harness/sweep.hpp"
#include "eglom/harness/train.hpp"
#include "eglom/world/dataset_io.hpp"
#include "eglom/world/svg.hpp"
#include "version.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <optional>
#include <thread>

namespace eglom::cli {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

namespace {

/// A usage problem discovered after parsing (bad config, missing input).
class UsageError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

fs::path default_output(const std::string& command) {
    const char* root = std::getenv("EGLOM_OUTPUT_ROOT");
    return fs::path(root && *root ? root : "runs") / command;
}

void require_file(const fs::path& p, const std::string& what) {
    if (!fs::exists(p)) throw UsageError(what + " not found: " + p.string());
}

std::uint64_t fnv1a(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::uint64_t h = 1469598103934665603ULL;
    char buf[1 << 16];
    while (in.read(buf, sizeof buf) || in.gcount() > 0) {
        for (std::streamsize i = 0; i < in.gcount(); ++i) {
            h = (h ^ std::uint8_t(buf[i])) * 1099511628211ULL;
        }
    }
    return h;
}

/// Records what a run read, how it was seeded and which build produced it.
struct Manifest {
    std::string command;
    std::vector<std::string> args;
    ordered_json inputs = ordered_json::array();
    ordered_json outputs = ordered_json::array();
    ordered_json settings = ordered_json::object();
    std::optional<std::uint64_t> seed;
    unsigned threads = 1;

    void input(const fs::path& p) {
        if (p.empty()) return;
        std::ostringstream h;
        h << std::hex << std::setw(16) << std::setfill('0') << fnv1a(p);
        inputs.push_back({{"path", p.string()}, {"bytes", fs::file_size(p)}, {"fnv1a", h.str()}});
    }
    void output(const fs::path& p) { outputs.push_back(p.string()); }

    void write(const fs::path& where) const {
        ordered_json j;
        j["command"] = command;
        j["args"] = args;
        j["version"] = kVersion;
        j["git"] = kGitRevision;
        j["seed"] = seed ? ordered_json(*seed) : ordered_json(nullptr);
        j["threads"] = threads;
        j["inputs"] = inputs;
        j["settings"] = settings;
        j["outputs"] = outputs;
        std::ofstream(where) << j.dump(2) << '\n';
    }
};

std::vector<double> parse_doubles(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        try {
            out.push_back(std::stod(item));
        } catch (const std::exception&) {
            throw UsageError("expected a comma-separated list of numbers, got '" + s + "'");
        }
    }
    return out;
}

harness::RunConfig config_from(const fs::path& path, const std::vector<std::string>& overrides) {
    harness::RunConfig cfg;
    if (!path.empty()) {
        require_file(path, "config file");
        cfg = harness::load_config(path);
    }
    for (const auto& kv : overrides) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("override '" + kv + "' is not key=value");
        cfg.set(kv.substr(0, eq), kv.substr(eq + 1));
    }
    return cfg;
}

void write_metrics_row(std::ostream& out, const std::string& source, const std::string& task,
                       const harness::MetricsRecord& m) {
    out << std::setprecision(10) << source << ',' << task << ',' << m.scenes << ',' << m.whole_mse << ','
        << m.part_mse << ',' << m.accuracy << ',';
    if (m.island_separation) out << *m.island_separation;
    out << ',' << m.parameter_count << ',' << m.wall_s << '\n';
}

constexpr const char* kMetricsHeader =
    "source,task,scenes,whole_mse,part_mse,accuracy,island_sep,params,wall_s\n";

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"eGLOM: recurrent part-whole networks on ellipse scenes", "eglom"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    std::optional<std::uint64_t> seed;
    unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    std::string out_path;
    auto common = [&](CLI::App* sub) {
        sub->add_option("--seed", seed, "Seed for every random choice of the run");
        sub->add_option("--threads", threads, "Worker threads")->check(CLI::PositiveNumber);
        sub->add_option("--out", out_path, "Output location");
    };

    // gen-data
    std::string task_name = "1-from-2";
    std::size_t count = 1000;
    bool perturb = false;
    std::string split;
    std::string json_path;
    auto* gen = app.add_subcommand("gen-data", "Generate a dataset file");
    common(gen);
    gen->add_option("--task", task_name, "1-from-2 | 2-from-2 | 2-from-20 | 1-from-20");
    gen->add_option("--n", count, "Number of scenes")->check(CLI::PositiveNumber);
    gen->add_flag("--perturb", perturb, "Jitter one or two ellipses per object");
    gen->add_option("--rotation-split", split, "Draw rotations from the train or test quadrants")
        ->check(CLI::IsMember({"train", "test"}));
    gen->add_option("--json", json_path, "Also write a JSON rendering");

    // train / sweep
    std::string config_path;
    std::vector<std::string> overrides;
    auto* train = app.add_subcommand("train", "Train a model from a config file");
    common(train);
    train->add_option("--config", config_path, "key = value config file")->required();
    train->add_option("--set", overrides, "Override a config key (key=value)");

    std::string axis, values;
    std::size_t seeds = 0;
    auto* sweep = app.add_subcommand("sweep", "Train once per axis value and seed");
    common(sweep);
    sweep->add_option("--config", config_path, "key = value config file")->required();
    sweep->add_option("--set", overrides, "Override a config key (key=value)");
    sweep->add_option("--axis", axis, "Axis to vary");
    sweep->add_option("--values", values, "Comma-separated axis values");
    sweep->add_option("--seeds", seeds, "Runs per value");

    // eval / interp-eval / analysis
    std::string ckpt_path, data_path;
    auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint on a dataset");
    common(eval);
    eval->add_option("--checkpoint", ckpt_path)->required();
    eval->add_option("--data", data_path)->required();

    double bin_width = 5.0;
    auto* interp = app.add_subcommand("interp-eval", "Metrics binned by distance to training rotations");
    common(interp);
    interp->add_option("--checkpoint", ckpt_path)->required();
    interp->add_option("--data", data_path, "Test-split dataset")->required();
    interp->add_option("--bin", bin_width, "Bin width in degrees")->check(CLI::PositiveNumber);

    std::size_t limit = 0;
    auto* exp = app.add_subcommand("export-embeddings", "Write per-iteration embeddings as JSON lines");
    common(exp);
    exp->add_option("--checkpoint", ckpt_path)->required();
    exp->add_option("--data", data_path)->required();
    exp->add_option("--limit", limit, "Export only the first scenes");

    std::size_t samples = 5000;
    std::string field = "all";
    auto* basis = app.add_subcommand("analyze-basis", "Correlate SVD embedding directions with pose");
    common(basis);
    basis->add_option("--checkpoint", ckpt_path)->required();
    basis->add_option("--data", data_path)->required();
    basis->add_option("--samples", samples, "Embeddings to collect")->check(CLI::PositiveNumber);
    basis->add_option("--field", field, "x | y | sx | sy | rotation | all");

    std::size_t scene_index = 0, loc_index = 0, coord = 0;
    std::string deltas = "-2,-1,-0.5,0,0.5,1,2";
    auto* modify = app.add_subcommand("modify-embedding", "Decode an object embedding with one coordinate shifted");
    common(modify);
    modify->add_option("--checkpoint", ckpt_path)->required();
    modify->add_option("--data", data_path)->required();
    modify->add_option("--scene", scene_index);
    modify->add_option("--loc", loc_index);
    modify->add_option("--index", coord, "Embedding coordinate")->required();
    modify->add_option("--deltas", deltas);

    auto* render = app.add_subcommand("render", "Draw a scene as SVG");
    common(render);
    render->add_option("--data", data_path)->required();
    render->add_option("--scene", scene_index);
    render->add_option("--checkpoint", ckpt_path, "Overlay the model's reconstruction");

    std::vector<std::string> argv_rev(args.rbegin(), args.rend());
    try {
        app.parse(argv_rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kUsage;
    }

    CLI::App* sub = app.get_subcommands().front();
    Manifest manifest;
    manifest.command = sub->get_name();
    manifest.args = args;
    manifest.seed = seed;
    manifest.threads = threads;
    const fs::path out_default = default_output(sub->get_name());

    try {
        if (sub == gen) {
            world::DatasetSpec spec;
            try {
                spec.task = world::parse_task(task_name);
            } catch (const std::exception& e) {
                throw UsageError(e.what());
            }
            spec.count = count;
            spec.perturb = perturb;
            spec.seed = seed.value_or(0);
            if (!split.empty()) {
                const auto rs = world::rotation_split(spec);
                spec = split == "train" ? rs.train : rs.test;
            }
            const fs::path file = out_path.empty() ? out_default / "data.bin" : fs::path(out_path);
            if (file.has_parent_path()) fs::create_directories(file.parent_path());
            const world::Dataset ds = world::generate_dataset(spec, threads);
            world::write_dataset(ds, file);
            manifest.output(file);
            if (!json_path.empty()) {
                std::ofstream(json_path) << world::dataset_to_json(ds);
                manifest.output(json_path);
            }
            manifest.settings = {{"task", task_name}, {"n", count}, {"perturb", perturb},
                                 {"rotation_split", split}, {"template_seed", spec.template_seed}};
            manifest.write(fs::path(file.string() + ".manifest.json"));
            out << "wrote " << ds.scenes.size() << " scenes to " << file.string() << '\n';
            return kOk;
        }

        const fs::path dir = out_path.empty() ? out_default : fs::path(out_path);

        if (sub == train || sub == sweep) {
            harness::RunConfig cfg;
            try {
                cfg = config_from(config_path, overrides);
                if (seed) {
                    cfg.seed = *seed;
                    cfg.data_seed = *seed;
                }
                cfg.threads = threads;
                cfg.output_dir = dir;
                if (sub == sweep) {
                    if (!axis.empty()) cfg.axis = axis;
                    if (!values.empty()) cfg.set("values", values);
                    if (seeds) cfg.seeds = seeds;
                    if (cfg.axis.empty()) throw UsageError("sweep needs --axis or an axis key");
                }
                cfg.validate();
            } catch (const harness::ConfigError& e) {
                throw UsageError(e.what());
            }
            fs::create_directories(dir);
            manifest.input(fs::path(config_path));
            manifest.input(cfg.train_data);
            manifest.input(cfg.val_data);
            manifest.seed = cfg.seed;
            for (const auto& [k, v] : cfg.to_map()) manifest.settings[k] = v;
            const auto train_set = harness::load_or_generate(cfg.train_data, cfg.train_spec(), threads);
            const auto val_set = harness::load_or_generate(cfg.val_data, cfg.val_spec(), threads);
            if (sub == train) {
                const auto result = harness::train(cfg, train_set, val_set, [&](const harness::EpochRecord& r) {
                    out << "epoch " << r.epoch << " train_loss " << r.train_loss << " val_loss "
                        << r.validation.loss.value_or(0.0) << " part_mse " << r.validation.part_mse
                        << " accuracy " << r.validation.accuracy << '\n';
                });
                manifest.output(dir / "metrics.csv");
                manifest.output(dir / "best.ckpt");
                out << "best epoch " << result.best_epoch << ", checkpoint " << (dir / "best.ckpt").string() << '\n';
            } else {
                const auto rows = harness::sweep(cfg, train_set, val_set);
                std::ofstream csv(dir / "sweep.csv");
                harness::write_sweep_csv(rows, csv);
                std::ofstream summary(dir / "summary.csv");
                harness::write_summary_csv(harness::summarize(rows), summary);
                manifest.output(dir / "sweep.csv");
                manifest.output(dir / "summary.csv");
                out << "wrote " << rows.size() << " runs to " << (dir / "sweep.csv").string() << '\n';
            }
            manifest.write(dir / "manifest.json");
            return kOk;
        }

        require_file(data_path, "dataset");
        if (!ckpt_path.empty()) require_file(ckpt_path, "checkpoint");
        manifest.input(ckpt_path);
        manifest.input(data_path);
        const world::Dataset data = world::read_dataset(data_path);
        std::optional<ad::Checkpoint> ckpt;
        if (!ckpt_path.empty()) ckpt = ad::load_checkpoint(ckpt_path);
        fs::create_directories(dir);

        auto eglom_model = [&] {
            if (ckpt->kind != "eglom") throw UsageError("this command needs an eglom checkpoint");
            return net::EglomModel::from_checkpoint(*ckpt);
        };

        if (sub == eval) {
            harness::MetricsRecord m;
            try {
                m = harness::evaluate_checkpoint(*ckpt, data, threads);
            } catch (const harness::ConfigError& e) {
                throw UsageError(e.what());
            }
            const fs::path csv = dir / "eval.csv";
            const bool fresh = !fs::exists(csv);
            std::ofstream f(csv, std::ios::app);
            if (fresh) f << kMetricsHeader;
            write_metrics_row(f, ckpt_path, std::string(world::task_name(data.task)), m);
            out << kMetricsHeader;
            write_metrics_row(out, ckpt_path, std::string(world::task_name(data.task)), m);
            manifest.output(csv);
        } else if (sub == interp) {
            const auto preds = harness::predict_checkpoint(*ckpt, data.scenes, threads);
            const auto bins = harness::interpolation_eval(preds, data.scenes, bin_width);
            const fs::path csv = dir / "interpolation.csv";
            std::ofstream f(csv);
            f << "lo_deg,hi_deg,locations,whole_mse,part_mse,accuracy\n" << std::setprecision(10);
            for (const auto& b : bins) {
                f << b.lo_deg << ',' << b.hi_deg << ',';
                if (b.metrics) {
                    f << b.metrics->locations << ',' << b.metrics->whole_mse << ','
                      << b.metrics->part_mse << ',' << b.metrics->accuracy;
                } else {
                    f << "0,,,";
                }
                f << '\n';
            }
            manifest.output(csv);
            out << "wrote " << bins.size() << " bins to " << csv.string() << '\n';
        } else if (sub == exp) {
            const auto model = eglom_model();
            const std::size_t n = limit ? std::min(limit, data.scenes.size()) : data.scenes.size();
            const fs::path file = dir / "embeddings.jsonl";
            std::ofstream f(file);
            const auto records = analysis::export_embeddings(
                model, std::span<const world::Scene>(data.scenes.data(), n), f);
            manifest.output(file);
            out << "wrote " << records << " records to " << file.string() << '\n';
        } else if (sub == basis) {
            const auto model = eglom_model();
            const auto s = analysis::collect_object_samples(model, data.scenes, samples);
            const auto b = analysis::svd_basis(s.embeddings);
            std::vector<analysis::Correlation> rows;
            std::vector<analysis::PoseField> fields;
            try {
                if (field == "all") {
                    fields = {analysis::PoseField::x, analysis::PoseField::y, analysis::PoseField::sx,
                              analysis::PoseField::sy, analysis::PoseField::rotation};
                } else {
                    fields = {analysis::parse_pose_field(field)};
                }
            } catch (const std::invalid_argument& e) {
                throw UsageError(e.what());
            }
            for (auto f : fields) {
                const auto r = analysis::basis_pose_correlation(s.embeddings, s.poses, b, f);
                rows.insert(rows.end(), r.begin(), r.end());
            }
            const fs::path csv = dir / "basis_correlation.csv";
            std::ofstream f(csv);
            analysis::write_correlation_csv(rows, f);
            manifest.output(csv);
            manifest.settings = {{"samples", s.poses.size()}, {"rank", b.rank}, {"truncated", b.truncated}};
            out << "basis rank " << b.rank << (b.truncated ? " (truncated)" : "") << ", wrote "
                << csv.string() << '\n';
        } else if (sub == modify) {
            const auto model = eglom_model();
            if (scene_index >= data.scenes.size() || loc_index >= data.scenes[scene_index].size()) {
                throw UsageError("scene/location index out of range");
            }
            if (coord >= model.hyper().embedding_dim) {
                throw UsageError("--index must be below the embedding size " +
                                 std::to_string(model.hyper().embedding_dim));
            }
            const auto preds = harness::predict(model, std::span<const world::Scene>(&data.scenes[scene_index], 1));
            const auto emb = preds.object_embedding.row(loc_index);
            const auto grid = parse_doubles(deltas);
            const auto mods = analysis::embedding_modification(model, emb, coord, grid);
            ordered_json j = ordered_json::array();
            for (const auto& m : mods) j.push_back({{"delta", m.delta}, {"pose", m.pose}, {"probabilities", m.probabilities}});
            std::ofstream(dir / "modification.json") << j.dump(2) << '\n';
            std::ofstream(dir / "modification.svg") << analysis::render_modification_svg(mods, data.templates);
            manifest.output(dir / "modification.json");
            manifest.output(dir / "modification.svg");
            out << "decoded " << mods.size() << " modified embeddings into " << dir.string() << '\n';
        } else if (sub == render) {
            if (scene_index >= data.scenes.size()) throw UsageError("--scene out of range");
            const world::Scene& scene = data.scenes[scene_index];
            std::vector<world::EllipseSymbol> recon;
            if (ckpt) {
                const auto preds = harness::predict_checkpoint(*ckpt, std::span<const world::Scene>(&scene, 1));
                for (std::size_t i = 0; i < scene.size(); ++i) {
                    recon.push_back(world::EllipseSymbol::from_range(preds.reconstruction.row(i)));
                }
            }
            world::SvgOptions opt;
            opt.cell = data.cell;
            const fs::path file = dir / ("scene_" + std::to_string(scene_index) + ".svg");
            std::ofstream(file) << world::render_scene_svg(scene, ckpt ? &recon : nullptr, opt);
            manifest.output(file);
            out << "wrote " << file.string() << '\n';
        }
        manifest.write(dir / "manifest.json");
        return kOk;
    } catch (const UsageError& e) {
        err << "error: " << e.what() << '\n' << sub->help();
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kFailure;
    }
}

}  // namespace eglom::cli
