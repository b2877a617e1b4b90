#include "eglom/autodiff/checkpoint.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>

namespace eglom::ad {

namespace {

using json = nlohmann::ordered_json;

json tensor_json(const std::string& name, const Tensor& t) {
    json j;
    j["name"] = name;
    j["shape"] = t.shape();
    j["values"] = t.storage();
    return j;
}

Tensor tensor_from(const json& j) {
    return Tensor(j.at("shape").get<std::vector<std::size_t>>(),
                  j.at("values").get<std::vector<double>>());
}

std::string group_of(const std::string& name) {
    const auto dot = name.find('.');
    return dot == std::string::npos ? std::string{} : name.substr(0, dot);
}

}  // namespace

std::string checkpoint_to_string(const Checkpoint& ckpt) {
    json j;
    j["format_version"] = Checkpoint::kFormatVersion;
    j["kind"] = ckpt.kind;
    j["meta"] = ckpt.meta;

    // Groups keep first-appearance order so loading restores parameter indices.
    json groups = json::array();
    for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
        const std::string g = group_of(ckpt.params.name(i));
        if (groups.empty() || groups.back()["network"] != g) {
            groups.push_back(json{{"network", g}, {"layers", json::array()}});
        }
        groups.back()["layers"].push_back(tensor_json(ckpt.params.name(i), ckpt.params[i]));
    }
    j["networks"] = std::move(groups);

    if (ckpt.optimizer) {
        const AdamState& s = *ckpt.optimizer;
        json o;
        o["learning_rate"] = s.config.learning_rate;
        o["decay"] = s.config.decay;
        o["beta1"] = s.config.beta1;
        o["beta2"] = s.config.beta2;
        o["epsilon"] = s.config.epsilon;
        o["step"] = s.step;
        json m = json::array(), v = json::array();
        for (const auto& t : s.first_moment) m.push_back(t.storage());
        for (const auto& t : s.second_moment) v.push_back(t.storage());
        o["first_moment"] = std::move(m);
        o["second_moment"] = std::move(v);
        j["optimizer"] = std::move(o);
    }
    return j.dump();
}

Checkpoint checkpoint_from_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw CheckpointError(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    try {
        const int version = j.at("format_version").get<int>();
        if (version != Checkpoint::kFormatVersion) {
            throw CheckpointError("unsupported checkpoint format version " +
                                  std::to_string(version) + " (expected " +
                                  std::to_string(Checkpoint::kFormatVersion) + ")");
        }
        Checkpoint ckpt;
        ckpt.kind = j.at("kind").get<std::string>();
        ckpt.meta = j.at("meta").get<std::map<std::string, std::string>>();
        for (const auto& group : j.at("networks")) {
            for (const auto& layer : group.at("layers")) {
                ckpt.params.add(layer.at("name").get<std::string>(), tensor_from(layer));
            }
        }
        if (j.contains("optimizer")) {
            const auto& o = j["optimizer"];
            AdamConfig cfg;
            cfg.learning_rate = o.at("learning_rate").get<double>();
            cfg.decay = o.at("decay").get<double>();
            cfg.beta1 = o.at("beta1").get<double>();
            cfg.beta2 = o.at("beta2").get<double>();
            cfg.epsilon = o.at("epsilon").get<double>();
            AdamState s(cfg, ckpt.params);
            s.step = o.at("step").get<std::uint64_t>();
            const auto& m = o.at("first_moment");
            const auto& v = o.at("second_moment");
            if (m.size() != ckpt.params.size() || v.size() != ckpt.params.size()) {
                throw CheckpointError("optimizer moments do not match the parameter count");
            }
            for (std::size_t i = 0; i < ckpt.params.size(); ++i) {
                s.first_moment[i] = Tensor(ckpt.params[i].shape(), m[i].get<std::vector<double>>());
                s.second_moment[i] = Tensor(ckpt.params[i].shape(), v[i].get<std::vector<double>>());
            }
            ckpt.optimizer = std::move(s);
        }
        return ckpt;
    } catch (const json::exception& e) {
        throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
    } catch (const DimensionError& e) {
        throw CheckpointError(std::string("malformed checkpoint: ") + e.what());
    }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    const auto tmp = std::filesystem::path(path).concat(".tmp");
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw CheckpointError("cannot write checkpoint " + tmp.string());
        out << checkpoint_to_string(ckpt);
        if (!out) throw CheckpointError("short write on checkpoint " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw CheckpointError("cannot open checkpoint " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return checkpoint_from_string(ss.str());
}

}  // namespace eglom::ad
