#include "eglom/world/scene.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>
#include <exception>
#include <thread>
#include <utility>

namespace eglom::world {

namespace {

constexpr int kMaxSceneAttempts = 1000;
constexpr double kMinCanonicalSpacing = 0.16;

EllipseSymbol axis_ellipse(double cx, double cy, double rx, double ry) {
    return EllipseSymbol{rx, 0.0, 0.0, ry, cx, cy};
}

double sample_angle_deg(const std::vector<AngleRange>& ranges, Rng& rng) {
    double total = 0.0;
    for (const auto& r : ranges) total += r.hi_deg - r.lo_deg;
    for (;;) {
        double u = rng.uniform(0.0, total);
        for (const auto& r : ranges) {
            const double w = r.hi_deg - r.lo_deg;
            if (u < w) {
                const double a = r.lo_deg + u;
                if (r.open_low && a == r.lo_deg) break;
                return a;
            }
            u -= w;
        }
    }
}

std::pair<long long, long long> cell_key(double x, double y, double cell) {
    return {std::llround(x / cell), std::llround(y / cell)};
}

}  // namespace

bool EllipseSymbol::valid() const {
    for (double v : to_array()) {
        if (!std::isfinite(v)) return false;
    }
    return determinant() != 0.0;
}

EllipseSymbol compose(const EllipseSymbol& o, const EllipseSymbol& i) {
    return EllipseSymbol{
        o.a11 * i.a11 + o.a12 * i.a21, o.a11 * i.a12 + o.a12 * i.a22,
        o.a21 * i.a11 + o.a22 * i.a21, o.a21 * i.a12 + o.a22 * i.a22,
        o.a11 * i.tx + o.a12 * i.ty + o.tx, o.a21 * i.tx + o.a22 * i.ty + o.ty,
    };
}

std::array<double, 6> pose_to_affine(const ObjectPose& p) {
    if (!(p.sx > 0.0) || !(p.sy > 0.0)) {
        throw std::invalid_argument("object pose scales must be positive");
    }
    const double c = std::cos(p.rotation);
    const double s = std::sin(p.rotation);
    return {c * p.sx, -s * p.sy, s * p.sx, c * p.sy, p.tx, p.ty};
}

bool ObjectTemplate::axis_aligned() const {
    return std::all_of(parts.begin(), parts.end(),
                       [](const EllipseSymbol& e) { return e.a12 == 0.0 && e.a21 == 0.0; });
}

// Hand-authored layouts in canonical object units. Both use the part order
// nose, left eye, right eye, mouth, head outline, with every pair of centres
// at least 0.16 apart.
ObjectTemplate face_template() {
    ObjectTemplate t;
    t.id = 0;
    t.class_index = 0;
    t.name = "face";
    t.parts = {
        axis_ellipse(0.00, -0.16, 0.035, 0.080),   // nose
        axis_ellipse(-0.13, 0.15, 0.070, 0.045),   // left eye
        axis_ellipse(0.13, 0.15, 0.070, 0.045),    // right eye
        axis_ellipse(0.00, -0.33, 0.130, 0.040),   // mouth
        axis_ellipse(0.00, 0.00, 0.320, 0.420),    // head
    };
    return t;
}

ObjectTemplate sheep_template() {
    ObjectTemplate t;
    t.id = 1;
    t.class_index = 1;
    t.name = "sheep";
    t.parts = {
        axis_ellipse(0.00, -0.22, 0.090, 0.050),   // nose
        axis_ellipse(-0.20, 0.18, 0.045, 0.070),   // left eye
        axis_ellipse(0.20, 0.18, 0.045, 0.070),    // right eye
        axis_ellipse(0.00, -0.38, 0.060, 0.025),   // mouth
        axis_ellipse(0.00, 0.02, 0.220, 0.450),    // head
    };
    return t;
}

double template_distance(const ObjectTemplate& a, const ObjectTemplate& b) {
    auto canonical = [](const ObjectTemplate& t) {
        std::vector<std::array<double, 6>> parts;
        for (const auto& e : t.parts) parts.push_back({e.tx, e.ty, e.a11, e.a22, e.a12, e.a21});
        std::sort(parts.begin(), parts.end());
        return parts;
    };
    const auto pa = canonical(a);
    const auto pb = canonical(b);
    double d2 = 0.0;
    for (std::size_t i = 0; i < pa.size(); ++i) {
        for (std::size_t k = 0; k < 6; ++k) d2 += (pa[i][k] - pb[i][k]) * (pa[i][k] - pb[i][k]);
    }
    return std::sqrt(d2);
}

std::vector<ObjectTemplate> random_templates(std::size_t count, std::uint64_t seed) {
    constexpr double kMinTemplateDistance = 0.05;
    Rng rng(seed);
    std::vector<ObjectTemplate> out;
    while (out.size() < count) {
        ObjectTemplate t;
        t.id = static_cast<int>(out.size());
        t.class_index = t.id;
        t.name = "random" + std::to_string(t.id);
        std::size_t placed = 0;
        while (placed < kPartsPerObject) {
            const double cx = rng.uniform(-0.35, 0.35);
            const double cy = rng.uniform(-0.35, 0.35);
            bool clear = true;
            for (std::size_t k = 0; k < placed; ++k) {
                clear = clear && std::hypot(cx - t.parts[k].tx, cy - t.parts[k].ty) >= kMinCanonicalSpacing;
            }
            if (!clear) continue;
            t.parts[placed++] =
                axis_ellipse(cx, cy, rng.uniform(0.03, 0.15), rng.uniform(0.03, 0.15));
        }
        const bool distinct = std::all_of(out.begin(), out.end(), [&](const ObjectTemplate& o) {
            return template_distance(o, t) > kMinTemplateDistance;
        });
        if (distinct) out.push_back(std::move(t));
    }
    return out;
}

ObjectSymbol Scene::object_symbol(std::size_t location) const {
    const ObjectInstance& obj = objects.at(std::size_t(locations.at(location).instance));
    return ObjectSymbol{pose_to_affine(obj.pose), obj.class_index};
}

std::string_view task_name(Task task) {
    switch (task) {
        case Task::one_from_two: return "1-from-2";
        case Task::two_from_two: return "2-from-2";
        case Task::two_from_twenty: return "2-from-20";
        case Task::one_from_twenty: return "1-from-20";
    }
    return "?";
}

Task parse_task(std::string_view name) {
    for (Task t : {Task::one_from_two, Task::two_from_two, Task::two_from_twenty,
                   Task::one_from_twenty}) {
        if (task_name(t) == name) return t;
    }
    throw std::invalid_argument("unknown task '" + std::string(name) +
                                "' (expected 1-from-2, 2-from-2, 2-from-20 or 1-from-20)");
}

std::size_t objects_per_scene(Task task) {
    return (task == Task::one_from_two || task == Task::one_from_twenty) ? 1 : 2;
}

std::size_t class_count(Task task) {
    return (task == Task::one_from_two || task == Task::two_from_two) ? 2 : 20;
}

void DatasetSpec::validate() const {
    if (!(cell > 0.0)) throw std::invalid_argument("grid cell size must be positive");
    if (!(translation >= 0.0)) throw std::invalid_argument("translation range must be >= 0");
    if (!(scale_lo > 0.0) || !(scale_hi >= scale_lo)) {
        throw std::invalid_argument("scale range must be positive and non-empty");
    }
    if (!(jitter_lo > 0.0) || !(jitter_hi >= jitter_lo)) {
        throw std::invalid_argument("perturbation band must be positive and non-empty");
    }
    if (rotations.empty()) throw std::invalid_argument("no rotation ranges");
    for (const auto& r : rotations) {
        if (!(r.hi_deg > r.lo_deg)) throw std::invalid_argument("empty rotation range");
    }
}

std::vector<ObjectTemplate> make_templates(Task task, std::uint64_t template_seed) {
    if (class_count(task) == 2) return {face_template(), sheep_template()};
    return random_templates(20, template_seed);
}

std::array<EllipseSymbol, kPartsPerObject> instantiate(const ObjectTemplate& tmpl,
                                                       const ObjectPose& pose) {
    const EllipseSymbol outer = pose_transform(pose);
    std::array<EllipseSymbol, kPartsPerObject> out{};
    for (std::size_t k = 0; k < kPartsPerObject; ++k) out[k] = compose(outer, tmpl.parts[k]);
    return out;
}

Scene generate_scene(const DatasetSpec& spec, const std::vector<ObjectTemplate>& templates,
                     Rng& rng) {
    if (templates.empty()) throw GenerationError("no object templates");
    const std::size_t n_objects = objects_per_scene(spec.task);
    for (int attempt = 0; attempt < kMaxSceneAttempts; ++attempt) {
        Scene scene;
        std::set<std::pair<long long, long long>> used;
        bool collision = false;
        for (std::size_t o = 0; o < n_objects && !collision; ++o) {
            const ObjectTemplate& tmpl = templates[rng.index(templates.size())];
            ObjectInstance inst;
            inst.template_id = tmpl.id;
            inst.class_index = tmpl.class_index;
            inst.pose.tx = rng.uniform(-spec.translation, spec.translation);
            inst.pose.ty = rng.uniform(-spec.translation, spec.translation);
            const double angle = sample_angle_deg(spec.rotations, rng);
            inst.pose.rotation = angle * std::numbers::pi / 180.0;
            inst.pose.sx = rng.uniform(spec.scale_lo, spec.scale_hi);
            inst.pose.sy = rng.uniform(spec.scale_lo, spec.scale_hi);
            if (spec.rotation_split_test) inst.rotation_distance_deg = distance_to_training_rotations(angle);

            const auto parts = instantiate(tmpl, inst.pose);
            for (std::size_t k = 0; k < kPartsPerObject; ++k) {
                Location loc;
                loc.cell_x = snap_to_grid(parts[k].tx, spec.cell);
                loc.cell_y = snap_to_grid(parts[k].ty, spec.cell);
                loc.input = parts[k];
                loc.truth = parts[k];
                loc.instance = static_cast<int>(o);
                loc.part = static_cast<int>(k);
                if (!used.insert(cell_key(parts[k].tx, parts[k].ty, spec.cell)).second) {
                    collision = true;
                    break;
                }
                scene.locations.push_back(loc);
            }
            scene.objects.push_back(inst);
        }
        if (collision) continue;
        if (spec.perturb) {
            scene = perturb_scene(scene, spec.cell, rng, spec.perturb_per_object, spec.jitter_lo,
                                  spec.jitter_hi);
        }
        return scene;
    }
    throw GenerationError("no collision-free scene after " + std::to_string(kMaxSceneAttempts) +
                          " attempts; the dataset spec is over-constrained");
}

Scene perturb_scene(const Scene& scene, double cell, Rng& rng, bool per_object, double jitter_lo,
                    double jitter_hi) {
    Scene out = scene;
    const double log_lo = std::log(jitter_lo);
    const double log_hi = std::log(jitter_hi);
    // Stay strictly inside the cell so the jittered centre snaps back to it.
    const double half = 0.5 * cell * (1.0 - 1e-9);

    auto jitter = [&](Location& loc) {
        const double fx = std::exp(rng.uniform(log_lo, log_hi));
        const double fy = std::exp(rng.uniform(log_lo, log_hi));
        EllipseSymbol e = loc.input;
        e.a11 *= fx;
        e.a21 *= fx;
        e.a12 *= fy;
        e.a22 *= fy;
        e.tx = loc.cell_x + rng.uniform(-half, half);
        e.ty = loc.cell_y + rng.uniform(-half, half);
        loc.input = e;
        loc.perturbed = true;
    };

    auto pick = [&](std::vector<std::size_t> pool) {
        const std::size_t n = 1 + (rng.coin() ? 1 : 0);
        for (std::size_t i = 0; i < n && !pool.empty(); ++i) {
            const std::size_t j = rng.index(pool.size());
            jitter(out.locations[pool[j]]);
            pool.erase(pool.begin() + std::ptrdiff_t(j));
        }
    };

    if (per_object) {
        for (std::size_t o = 0; o < out.objects.size(); ++o) {
            std::vector<std::size_t> pool;
            for (std::size_t i = 0; i < out.locations.size(); ++i) {
                if (out.locations[i].instance == int(o)) pool.push_back(i);
            }
            pick(std::move(pool));
        }
    } else {
        std::vector<std::size_t> pool(out.locations.size());
        for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
        pick(std::move(pool));
    }
    return out;
}

bool in_training_rotations(double angle_deg) {
    const double a = std::fmod(std::fmod(angle_deg, 360.0) + 360.0, 360.0);
    return (a >= 0.0 && a < 90.0) || (a >= 180.0 && a < 270.0);
}

double distance_to_training_rotations(double angle_deg) {
    const double a = std::fmod(std::fmod(angle_deg, 360.0) + 360.0, 360.0);
    if (in_training_rotations(a)) return 0.0;
    const double within = std::fmod(a, 90.0);  // position inside a test quadrant
    return std::min(within, 90.0 - within);
}

RotationSplit rotation_split(const DatasetSpec& spec) {
    RotationSplit split{spec, spec};
    split.train.rotations = {AngleRange{0.0, 90.0}, AngleRange{180.0, 270.0}};
    split.train.rotation_split_test = false;
    split.test.rotations = {AngleRange{90.0, 180.0, true}, AngleRange{270.0, 360.0, true}};
    split.test.rotation_split_test = true;
    return split;
}

Dataset generate_dataset(const DatasetSpec& spec, unsigned threads) {
    spec.validate();
    Dataset ds;
    ds.task = spec.task;
    ds.cell = spec.cell;
    ds.templates = make_templates(spec.task, spec.template_seed);
    ds.scenes.resize(spec.count);

    auto work = [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
            Rng rng(spec.seed + i);
            ds.scenes[i] = generate_scene(spec, ds.templates, rng);
        }
    };
    threads = std::max(1u, threads);
    if (threads == 1 || spec.count < 2 * threads) {
        work(0, spec.count);
        return ds;
    }
    std::vector<std::exception_ptr> errors(threads);
    {
        std::vector<std::jthread> pool;
        const std::size_t chunk = (spec.count + threads - 1) / threads;
        for (unsigned w = 0; w < threads; ++w) {
            const std::size_t b = w * chunk;
            const std::size_t e = std::min(spec.count, b + chunk);
            if (b >= e) continue;
            pool.emplace_back([&, w, b, e] {
                try {
                    work(b, e);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
        }
    }
    for (const auto& err : errors) {
        if (err) std::rethrow_exception(err);
    }
    return ds;
}

}  // namespace eglom::world
