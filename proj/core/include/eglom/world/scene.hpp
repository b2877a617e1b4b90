#pragma once

#include "eglom/util/random.hpp"
#include "eglom/world/geometry.hpp"

#include <array>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace eglom::world {

class GenerationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

inline constexpr std::size_t kPartsPerObject = 5;

/// Five axis-aligned ellipses in the object's canonical pose.
struct ObjectTemplate {
    int id = 0;
    int class_index = 0;
    std::string name;
    std::array<EllipseSymbol, kPartsPerObject> parts{};

    bool axis_aligned() const;
};

/// The hand-authored face (class 0) and sheep (class 1). Parts are ordered
/// nose, left eye, right eye, mouth, head outline.
ObjectTemplate face_template();
ObjectTemplate sheep_template();

/// `count` random templates, class indices 0..count-1. Canonical centres lie
/// in [-0.35, 0.35]^2 at least 0.16 apart, so a pose with scale >= 0.5 never
/// maps two of them into one 0.05 cell; half-axes are in [0.03, 0.15].
std::vector<ObjectTemplate> random_templates(std::size_t count, std::uint64_t seed);

/// Distance between two templates under a canonical form that ignores part
/// order: parts sorted lexicographically by centre, then Euclidean distance of
/// the concatenated coefficient vectors.
double template_distance(const ObjectTemplate& a, const ObjectTemplate& b);

/// Pose affine coefficients plus ground-truth class.
struct ObjectSymbol {
    std::array<double, 6> pose{};
    int class_index = 0;
};

struct ObjectInstance {
    int template_id = 0;
    int class_index = 0;
    ObjectPose pose;
    /// Degrees from the nearest training rotation segment; NaN outside
    /// rotation-split test sets.
    double rotation_distance_deg = std::numeric_limits<double>::quiet_NaN();
};

/// One occupied grid cell.
struct Location {
    double cell_x = 0.0, cell_y = 0.0;
    EllipseSymbol input;
    EllipseSymbol truth;
    int instance = 0;
    int part = 0;
    bool perturbed = false;
};

struct Scene {
    std::vector<ObjectInstance> objects;
    std::vector<Location> locations;

    ObjectSymbol object_symbol(std::size_t location) const;
    std::size_t size() const noexcept { return locations.size(); }
};

enum class Task { one_from_two, two_from_two, two_from_twenty, one_from_twenty };

std::string_view task_name(Task task);
Task parse_task(std::string_view name);
std::size_t objects_per_scene(Task task);
std::size_t class_count(Task task);

/// Half-open angle interval in degrees.
struct AngleRange {
    double lo_deg = 0.0;
    double hi_deg = 360.0;
    bool open_low = false;
};

struct DatasetSpec {
    Task task = Task::one_from_two;
    std::size_t count = 1000;
    double cell = 0.05;
    double translation = 0.75;
    std::vector<AngleRange> rotations{AngleRange{}};
    double scale_lo = 0.5;
    double scale_hi = 1.5;
    bool perturb = false;
    bool perturb_per_object = true;
    /// Multiplicative band for perturbation scale jitter.
    double jitter_lo = 0.8;
    double jitter_hi = 1.25;
    std::uint64_t seed = 0;
    std::uint64_t template_seed = 20210613;
    bool rotation_split_test = false;

    void validate() const;
};

/// Templates for a task: face and sheep, or twenty random ones.
std::vector<ObjectTemplate> make_templates(Task task, std::uint64_t template_seed);

/// The five ellipses of `tmpl` placed at `pose`, in template part order.
std::array<EllipseSymbol, kPartsPerObject> instantiate(const ObjectTemplate& tmpl,
                                                       const ObjectPose& pose);

/// Draws one scene. Rejects and redraws the whole scene when two ellipse
/// centres fall into one grid cell; throws GenerationError after 1000 tries.
Scene generate_scene(const DatasetSpec& spec, const std::vector<ObjectTemplate>& templates,
                     Rng& rng);

/// Jitters one or two ellipses per object (or per scene when
/// `per_object` is false): per-axis scale by a log-uniform factor in
/// [jitter_lo, jitter_hi], centre moved uniformly within its original cell.
/// Ground-truth fields are left untouched.
Scene perturb_scene(const Scene& scene, double cell, Rng& rng, bool per_object = true,
                    double jitter_lo = 0.8, double jitter_hi = 1.25);

struct RotationSplit {
    DatasetSpec train;
    DatasetSpec test;
};

/// Train rotations from [0, 90) and [180, 270), test rotations from the other
/// two quadrants; test scenes record their angular distance to training.
RotationSplit rotation_split(const DatasetSpec& spec);

bool in_training_rotations(double angle_deg);

/// Degrees from `angle_deg` to the nearest training segment; 0 inside one.
double distance_to_training_rotations(double angle_deg);

struct Dataset {
    Task task = Task::one_from_two;
    double cell = 0.05;
    std::vector<ObjectTemplate> templates;
    std::vector<Scene> scenes;
};

/// Scene i is drawn from its own generator seeded with spec.seed + i, so the
/// output does not depend on how generation is split across workers.
Dataset generate_dataset(const DatasetSpec& spec, unsigned threads = 1);

}  // namespace eglom::world
