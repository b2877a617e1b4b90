#include "eglom/harness/config.hpp"

#include "eglom/world/dataset_io.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <thread>

namespace eglom::harness {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::uint64_t to_u64(const std::string& key, const std::string& s) {
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw ConfigError("'" + key + "' expects a non-negative integer, got '" + s + "'");
    }
    return v;
}

double to_double(const std::string& key, const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used == s.size()) return v;
    } catch (const std::exception&) {
    }
    throw ConfigError("'" + key + "' expects a number, got '" + s + "'");
}

bool to_bool(const std::string& key, const std::string& s) {
    if (s == "1" || s == "true" || s == "on" || s == "yes") return true;
    if (s == "0" || s == "false" || s == "off" || s == "no") return false;
    throw ConfigError("'" + key + "' expects a boolean, got '" + s + "'");
}

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(item);
    }
    return out;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
    if (key == "model") {
        if (value == "eglom") model = ModelKind::eglom;
        else if (value == "baseline") model = ModelKind::baseline;
        else throw ConfigError("'model' must be eglom or baseline, got '" + value + "'");
    } else if (key == "task") {
        try {
            task = world::parse_task(value);
        } catch (const std::exception& e) {
            throw ConfigError(e.what());
        }
    } else if (key == "train_data") train_data = value;
    else if (key == "val_data") val_data = value;
    else if (key == "train_count") train_count = to_u64(key, value);
    else if (key == "val_count") val_count = to_u64(key, value);
    else if (key == "data_seed") data_seed = to_u64(key, value);
    else if (key == "perturb") perturb = to_bool(key, value);
    else if (key == "rotation_split") rotation_split = to_bool(key, value);
    else if (key == "learning_rate") optimizer.learning_rate = to_double(key, value);
    else if (key == "lr_decay") optimizer.decay = to_double(key, value);
    else if (key == "epochs") epochs = to_u64(key, value);
    else if (key == "batch_size") batch_size = to_u64(key, value);
    else if (key == "shards") shards = to_u64(key, value);
    else if (key == "seed") seed = to_u64(key, value);
    else if (key == "threads") threads = unsigned(to_u64(key, value));
    else if (key == "output_dir") output_dir = value;
    else if (key == "axis") axis = value;
    else if (key == "values") values = split_list(value);
    else if (key == "seeds") seeds = to_u64(key, value);
    else if (key.rfind("baseline.", 0) == 0) {
        baseline::BaselineSpec probe;
        try {
            if (!probe.set(key.substr(9), value)) throw ConfigError("unknown config key '" + key + "'");
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        baseline_overrides[key.substr(9)] = value;
    } else {
        bool known = false;
        try {
            known = hyper.set(key, value);
        } catch (const std::invalid_argument& e) {
            throw ConfigError(e.what());
        }
        if (!known) throw ConfigError("unknown config key '" + key + "'");
    }
}

std::map<std::string, std::string> RunConfig::to_map() const {
    std::map<std::string, std::string> m = hyper.to_map();
    m.erase("class_count");
    std::string vals;
    for (std::size_t i = 0; i < values.size(); ++i) vals += (i ? "," : "") + values[i];
    m.insert({{"model", model == ModelKind::eglom ? "eglom" : "baseline"},
              {"task", std::string(world::task_name(task))},
              {"train_data", train_data.string()},
              {"val_data", val_data.string()},
              {"train_count", std::to_string(train_count)},
              {"val_count", std::to_string(val_count)},
              {"data_seed", std::to_string(data_seed)},
              {"perturb", perturb ? "true" : "false"},
              {"rotation_split", rotation_split ? "true" : "false"},
              {"learning_rate", fmt(optimizer.learning_rate)},
              {"lr_decay", fmt(optimizer.decay)},
              {"epochs", std::to_string(epochs)},
              {"batch_size", std::to_string(batch_size)},
              {"shards", std::to_string(shards)},
              {"seed", std::to_string(seed)},
              {"threads", std::to_string(threads)},
              {"output_dir", output_dir.string()},
              {"axis", axis},
              {"values", vals},
              {"seeds", std::to_string(seeds)}});
    for (const auto& [k, v] : baseline_overrides) m["baseline." + k] = v;
    return m;
}

void RunConfig::validate() const {
    try {
        model_hyper().validate();
        baseline_spec().validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
    if (shards < 1) throw ConfigError("shards must be >= 1");
    if (!(optimizer.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
    if (!(optimizer.decay > 0.0 && optimizer.decay <= 1.0)) throw ConfigError("lr_decay must be in (0, 1]");
    for (const auto& p : {train_data, val_data}) {
        if (!p.empty() && !std::filesystem::exists(p)) {
            throw ConfigError("dataset file not found: " + p.string());
        }
    }
    if (train_data.empty() && train_count == 0) throw ConfigError("train_count must be >= 1");
    if (val_data.empty() && val_count == 0) throw ConfigError("val_count must be >= 1");
    if (!axis.empty()) {
        const auto& axes = sweep_axes();
        if (std::find(axes.begin(), axes.end(), axis) == axes.end()) {
            throw ConfigError("unknown sweep axis '" + axis + "'");
        }
        if (values.empty()) throw ConfigError("sweep axis '" + axis + "' has no values");
        if (seeds < 1) throw ConfigError("seeds must be >= 1");
    }
}

net::HyperParams RunConfig::model_hyper() const {
    net::HyperParams hp = hyper;
    hp.class_count = world::class_count(task);
    return hp;
}

baseline::BaselineSpec RunConfig::baseline_spec() const {
    baseline::BaselineSpec s = baseline::spec_for(task);
    for (const auto& [k, v] : baseline_overrides) s.set(k, v);
    return s;
}

unsigned RunConfig::worker_threads() const {
    if (threads > 0) return threads;
    return std::max(1u, std::thread::hardware_concurrency());
}

world::DatasetSpec RunConfig::train_spec() const {
    world::DatasetSpec s;
    s.task = task;
    s.count = train_count;
    s.perturb = perturb;
    s.seed = data_seed;
    if (rotation_split) s = world::rotation_split(s).train;
    return s;
}

world::DatasetSpec RunConfig::val_spec() const {
    world::DatasetSpec s = train_spec();
    s.count = val_count;
    // Scene i uses seed + i, so an offset beyond any training count keeps the
    // two sets disjoint.
    s.seed = data_seed + 1'000'000'000ULL;
    return s;
}

RunConfig parse_config(const std::string& text) {
    RunConfig cfg;
    std::istringstream in(text);
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.resize(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(number) + ": expected key = value");
        }
        const std::string key = trim(line.substr(0, eq));
        try {
            cfg.set(key, trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError("line " + std::to_string(number) + ": " + e.what());
        }
    }
    return cfg;
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config(ss.str());
}

const std::vector<std::string>& sweep_axes() {
    static const std::vector<std::string> axes{
        "iterations",         "embedding_dim",  "decoder_dim",          "attention_weight",
        "attention_temperature", "history_weight", "end_bottom_up_weight", "loss_weighting"};
    return axes;
}

void apply_axis(RunConfig& cfg, const std::string& axis, const std::string& value) {
    // loss_weighting scales the reconstruction term against a unit object term.
    if (axis == "loss_weighting") cfg.set("lambda_reconstruction", value);
    else cfg.set(axis, value);
}

world::Dataset load_or_generate(const std::filesystem::path& path, const world::DatasetSpec& spec,
                                unsigned threads) {
    if (!path.empty()) return world::read_dataset(path);
    return world::generate_dataset(spec, threads);
}

}  // namespace eglom::harness
