#include "eglom/net/hyperparams.hpp"

#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace eglom::net {

namespace {

std::string fmt(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

double to_double(const std::string& key, const std::string& s) {
    try {
        std::size_t used = 0;
        const double v = std::stod(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw std::invalid_argument("'" + key + "' expects a number, got '" + s + "'");
    }
}

std::size_t to_size(const std::string& key, const std::string& s) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw std::invalid_argument("'" + key + "' expects a non-negative integer, got '" + s + "'");
    }
    return v;
}

bool to_bool(const std::string& key, const std::string& s) {
    if (s == "1" || s == "true" || s == "on" || s == "yes") return true;
    if (s == "0" || s == "false" || s == "off" || s == "no") return false;
    throw std::invalid_argument("'" + key + "' expects a boolean, got '" + s + "'");
}

std::string join(const std::vector<std::size_t>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
    return out;
}

std::vector<std::size_t> split_sizes(const std::string& key, const std::string& s) {
    std::vector<std::size_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(to_size(key, item));
    return out;
}

/// Moves the rounding residual of a + b + c (summed in that order) into the
/// smaller non-zero one of b and c, whose finer spacing can always absorb it,
/// so the three weights add up to exactly 1.
void make_exact(double a, double& b, double& c) {
    if (a + b + c == 1.0) return;
    const bool use_c = c != 0.0 && (b == 0.0 || c <= b);
    double& x = use_c ? c : b;
    for (int i = 0; i < 1024 && a + b + c != 1.0; ++i) x = std::nextafter(x, a + b + c < 1.0 ? 2.0 : -1.0);
}

}  // namespace

void HyperParams::validate() const {
    auto fail = [](const std::string& what) { throw std::invalid_argument(what); };
    if (embedding_dim < 1) fail("embedding_dim must be >= 1");
    if (decoder_dim < 1) fail("decoder_dim must be >= 1");
    if (iterations < 1) fail("iterations must be >= 1");
    if (class_count < 1) fail("class_count must be >= 1");
    if (!(history_weight >= 0.0 && history_weight < 1.0)) fail("history_weight must be in [0, 1)");
    if (!(attention_weight >= 0.0 && attention_weight < 1.0)) fail("attention_weight must be in [0, 1)");
    if (!(history_weight + attention_weight < 1.0)) {
        fail("history_weight + attention_weight must be < 1");
    }
    if (!(attention_temperature > 0.0) || !std::isfinite(attention_temperature)) {
        fail("attention_temperature must be positive");
    }
    if (!(end_bottom_up_weight >= 0.0 && end_bottom_up_weight <= 1.0)) {
        fail("end_bottom_up_weight must be in [0, 1]");
    }
    if (!(position_extent > 0.0)) fail("position_extent must be positive");
    for (std::size_t h : symbol_decoder_hidden) {
        if (h < 1) fail("symbol_decoder_hidden sizes must be >= 1");
    }
    for (double l : {lambda_reconstruction, lambda_object, lambda_regularizer, class_loss_weight}) {
        if (!(l >= 0.0)) fail("loss weights must be >= 0");
    }
}

std::map<std::string, std::string> HyperParams::to_map() const {
    return {
        {"embedding_dim", std::to_string(embedding_dim)},
        {"decoder_dim", std::to_string(decoder_dim)},
        {"iterations", std::to_string(iterations)},
        {"class_count", std::to_string(class_count)},
        {"history_weight", fmt(history_weight)},
        {"attention_weight", fmt(attention_weight)},
        {"attention_temperature", fmt(attention_temperature)},
        {"attention_enabled", attention_enabled ? "true" : "false"},
        {"end_bottom_up_weight", fmt(end_bottom_up_weight)},
        {"history_from_first", history_from_first ? "true" : "false"},
        {"posenc_frequencies", std::to_string(posenc_frequencies)},
        {"position_extent", fmt(position_extent)},
        {"bottom_up_position", bottom_up_position ? "true" : "false"},
        {"symbol_decoder_hidden", join(symbol_decoder_hidden)},
        {"lambda_reconstruction", fmt(lambda_reconstruction)},
        {"lambda_object", fmt(lambda_object)},
        {"lambda_regularizer", fmt(lambda_regularizer)},
        {"class_loss_weight", fmt(class_loss_weight)},
    };
}

bool HyperParams::set(const std::string& key, const std::string& v) {
    if (key == "embedding_dim") embedding_dim = to_size(key, v);
    else if (key == "decoder_dim") decoder_dim = to_size(key, v);
    else if (key == "iterations") iterations = to_size(key, v);
    else if (key == "class_count") class_count = to_size(key, v);
    else if (key == "history_weight") history_weight = to_double(key, v);
    else if (key == "attention_weight") attention_weight = to_double(key, v);
    else if (key == "attention_temperature") attention_temperature = to_double(key, v);
    else if (key == "attention_enabled") attention_enabled = to_bool(key, v);
    else if (key == "end_bottom_up_weight") end_bottom_up_weight = to_double(key, v);
    else if (key == "history_from_first") history_from_first = to_bool(key, v);
    else if (key == "posenc_frequencies") posenc_frequencies = to_size(key, v);
    else if (key == "position_extent") position_extent = to_double(key, v);
    else if (key == "bottom_up_position") bottom_up_position = to_bool(key, v);
    else if (key == "symbol_decoder_hidden") symbol_decoder_hidden = split_sizes(key, v);
    else if (key == "lambda_reconstruction") lambda_reconstruction = to_double(key, v);
    else if (key == "lambda_object") lambda_object = to_double(key, v);
    else if (key == "lambda_regularizer") lambda_regularizer = to_double(key, v);
    else if (key == "class_loss_weight") class_loss_weight = to_double(key, v);
    else return false;
    return true;
}

HyperParams HyperParams::from_map(const std::map<std::string, std::string>& values) {
    return from_map(values, HyperParams{});
}

HyperParams HyperParams::from_map(const std::map<std::string, std::string>& values,
                                  HyperParams base) {
    for (const auto& [k, v] : values) {
        if (!base.set(k, v)) throw std::invalid_argument("unknown hyper-parameter '" + k + "'");
    }
    base.validate();
    return base;
}

LevelWeights level1_schedule(std::size_t t, std::size_t total, double history,
                             double end_bottom_up) {
    if (total == 0 || t >= total) throw std::out_of_range("iteration outside schedule");
    const double alpha = total == 1 ? 0.0 : double(t) / double(total - 1);
    const double free = 1.0 - history;
    LevelWeights w;
    w.history = history;
    w.top_down = alpha * (1.0 - end_bottom_up) * free;
    w.bottom_up = free - w.top_down;
    make_exact(w.history, w.bottom_up, w.top_down);
    return w;
}

LevelWeights level1_weights(const HyperParams& hp, std::size_t t) {
    const double history = (t == 0 && !hp.history_from_first) ? 0.0 : hp.history_weight;
    return level1_schedule(t, hp.iterations, history, hp.end_bottom_up_weight);
}

ObjectLevelWeights level2_weights(const HyperParams& hp, std::size_t t) {
    ObjectLevelWeights w;
    w.history = (t == 0 && !hp.history_from_first) ? 0.0 : hp.history_weight;
    w.attention = hp.attention_enabled ? hp.attention_weight : 0.0;
    w.bottom_up = 1.0 - w.history - w.attention;
    make_exact(w.history, w.bottom_up, w.attention);
    return w;
}

}  // namespace eglom::net
