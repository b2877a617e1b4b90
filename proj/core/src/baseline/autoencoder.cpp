#include "eglom/baseline/autoencoder.hpp"

#include <charconv>
#include <stdexcept>

namespace eglom::baseline {

namespace {

constexpr const char* kKind = "baseline";

std::size_t to_size(const std::string& key, const std::string& s) {
    std::size_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || ptr != s.data() + s.size()) {
        throw std::invalid_argument("'" + key + "' expects a non-negative integer, got '" + s + "'");
    }
    return v;
}

}  // namespace

void BaselineSpec::validate() const {
    if (objects < 1 || classes < 1 || hidden < 1 || bottleneck < 1) {
        throw std::invalid_argument("baseline sizes must be >= 1");
    }
    if (encoder_layers < 1 || decoder_layers < 1) {
        throw std::invalid_argument("baseline needs at least one hidden layer on each side");
    }
}

ad::MlpSpec BaselineSpec::encoder_spec() const {
    return {input_width(), std::vector<std::size_t>(encoder_layers, hidden), bottleneck};
}

ad::MlpSpec BaselineSpec::decoder_spec() const {
    return {bottleneck + grid_width(), std::vector<std::size_t>(decoder_layers, hidden),
            output_width()};
}

std::size_t BaselineSpec::parameter_count() const {
    return encoder_spec().parameter_count() + decoder_spec().parameter_count();
}

std::map<std::string, std::string> BaselineSpec::to_map() const {
    return {{"objects", std::to_string(objects)},
            {"classes", std::to_string(classes)},
            {"hidden", std::to_string(hidden)},
            {"bottleneck", std::to_string(bottleneck)},
            {"encoder_layers", std::to_string(encoder_layers)},
            {"decoder_layers", std::to_string(decoder_layers)}};
}

bool BaselineSpec::set(const std::string& key, const std::string& v) {
    if (key == "objects") objects = to_size(key, v);
    else if (key == "classes") classes = to_size(key, v);
    else if (key == "hidden") hidden = to_size(key, v);
    else if (key == "bottleneck") bottleneck = to_size(key, v);
    else if (key == "encoder_layers") encoder_layers = to_size(key, v);
    else if (key == "decoder_layers") decoder_layers = to_size(key, v);
    else return false;
    return true;
}

BaselineSpec BaselineSpec::from_map(const std::map<std::string, std::string>& values) {
    BaselineSpec s;
    for (const auto& [k, v] : values) {
        if (!s.set(k, v)) throw std::invalid_argument("unknown baseline setting '" + k + "'");
    }
    s.validate();
    return s;
}

BaselineSpec spec_for(world::Task task) {
    BaselineSpec s;
    s.objects = world::objects_per_scene(task);
    s.classes = world::class_count(task);
    return s;
}

std::vector<double> encode_input(const world::Scene& scene, std::size_t objects) {
    if (scene.objects.size() != objects || scene.size() != objects * world::kPartsPerObject) {
        throw ad::ContractError("baseline expects " + std::to_string(objects) +
                                " objects per scene, got " + std::to_string(scene.objects.size()));
    }
    std::vector<double> out;
    out.reserve(scene.size() * 8);
    for (std::size_t i = 0; i < scene.size(); ++i) {
        const world::Location& loc = scene.locations[i];
        if (loc.instance != int(i / world::kPartsPerObject) ||
            loc.part != int(i % world::kPartsPerObject)) {
            throw ad::ContractError("scene location " + std::to_string(i) +
                                    " is not in object/part order");
        }
        for (double v : loc.input.to_array()) out.push_back(v);
        out.push_back(loc.cell_x);
        out.push_back(loc.cell_y);
    }
    return out;
}

BaselineBatch make_batch(std::span<const world::Scene* const> scenes, const BaselineSpec& spec) {
    const std::size_t B = scenes.size();
    BaselineBatch b;
    b.inputs = Tensor::matrix(B, spec.input_width());
    b.grid = Tensor::matrix(B, spec.grid_width());
    b.targets = Tensor::matrix(B, spec.reconstruction_width());
    b.poses = Tensor::matrix(B * spec.objects, 6);
    b.labels.reserve(B * spec.objects);
    for (std::size_t s = 0; s < B; ++s) {
        const world::Scene& scene = *scenes[s];
        const auto in = encode_input(scene, spec.objects);
        std::copy(in.begin(), in.end(), b.inputs.row(s).begin());
        for (std::size_t i = 0; i < scene.size(); ++i) {
            const world::Location& loc = scene.locations[i];
            b.grid(s, 2 * i) = loc.cell_x;
            b.grid(s, 2 * i + 1) = loc.cell_y;
            const auto gt = loc.truth.to_array();
            for (std::size_t k = 0; k < 6; ++k) b.targets(s, 6 * i + k) = gt[k];
        }
        for (std::size_t o = 0; o < spec.objects; ++o) {
            const world::ObjectSymbol sym = scene.object_symbol(o * world::kPartsPerObject);
            for (std::size_t k = 0; k < 6; ++k) b.poses(s * spec.objects + o, k) = sym.pose[k];
            b.labels.push_back(sym.class_index);
        }
    }
    return b;
}

BaselineBatch make_batch(const std::vector<world::Scene>& scenes, const BaselineSpec& spec) {
    std::vector<const world::Scene*> ptrs;
    ptrs.reserve(scenes.size());
    for (const auto& s : scenes) ptrs.push_back(&s);
    return make_batch(std::span<const world::Scene* const>(ptrs), spec);
}

BaselineModel::BaselineModel(BaselineSpec spec) : spec_(std::move(spec)) { spec_.validate(); }

BaselineModel::BaselineModel(BaselineSpec spec, std::uint64_t seed) : BaselineModel(std::move(spec)) {
    eglom::Rng rng(seed);
    encoder_ = ad::Mlp("encoder", spec_.encoder_spec(), params_, rng);
    decoder_ = ad::Mlp("decoder", spec_.decoder_spec(), params_, rng);
}

BaselineModel BaselineModel::from_checkpoint(const ad::Checkpoint& ckpt) {
    if (ckpt.kind != kKind) {
        throw ad::CheckpointError("checkpoint holds a '" + ckpt.kind + "' model, not baseline");
    }
    std::map<std::string, std::string> values;
    for (const auto& [k, v] : ckpt.meta) {
        if (k.rfind("baseline.", 0) == 0) values.emplace(k.substr(9), v);
    }
    BaselineModel m(BaselineSpec::from_map(values));
    m.params_ = ckpt.params;
    m.encoder_ = ad::Mlp::bind("encoder", m.spec_.encoder_spec(), m.params_);
    m.decoder_ = ad::Mlp::bind("decoder", m.spec_.decoder_spec(), m.params_);
    return m;
}

ad::Checkpoint BaselineModel::to_checkpoint() const {
    ad::Checkpoint c;
    c.kind = kKind;
    for (const auto& [k, v] : spec_.to_map()) c.meta.emplace("baseline." + k, v);
    c.params = params_;
    return c;
}

BaselineOutput baseline_forward(Tape& tape, const BaselineModel& model, Var inputs, Var grid) {
    const BaselineSpec& spec = model.spec();
    if (inputs.value().cols() != spec.input_width()) {
        throw ad::DimensionError("baseline input width " + std::to_string(inputs.value().cols()) +
                                 ", expected " + std::to_string(spec.input_width()));
    }
    if (grid.value().cols() != spec.grid_width() || grid.value().rows() != inputs.value().rows()) {
        throw ad::DimensionError("baseline grid input has shape " + grid.value().shape_string());
    }
    Var code = model.encoder().forward(tape, model.params(), inputs);
    Var out = model.decoder().forward(tape, model.params(), ad::concat_cols(code, grid));

    // Per-object heads are laid out object-major after the reconstruction; a
    // row-major reshape to (B * objects) rows lines them up with the labels.
    const std::size_t B = inputs.value().rows();
    const std::size_t per = 6 + spec.classes;
    Var heads = ad::slice_cols(out, spec.reconstruction_width(), spec.objects * per);
    Tensor shaped(std::vector<std::size_t>{B * spec.objects, per}, heads.value().storage());
    const ad::NodeId ih = heads.id;
    Var rows = tape.record(std::move(shaped), {heads}, [ih](Tape& t, ad::NodeId self) {
        Tensor& g = t.grad(ih);
        const Tensor& gs = t.grad(self);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gs[i];
    });

    BaselineOutput r;
    r.reconstruction = ad::slice_cols(out, 0, spec.reconstruction_width());
    r.pose = ad::slice_cols(rows, 0, 6);
    r.logits = ad::slice_cols(rows, 6, spec.classes);
    return r;
}

BaselineOutput baseline_forward(Tape& tape, const BaselineModel& model, const BaselineBatch& batch) {
    return baseline_forward(tape, model, tape.constant(batch.inputs), tape.constant(batch.grid));
}

Var baseline_loss(const BaselineOutput& out, const BaselineBatch& batch) {
    return ad::lincomb({{1.0, ad::mse(out.reconstruction, batch.targets)},
                        {1.0, ad::mse(out.pose, batch.poses)},
                        {1.0, ad::softmax_cross_entropy(out.logits, batch.labels)}});
}

}  // namespace eglom::baseline
