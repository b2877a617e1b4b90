#pragma once

#include <array>
#include <cmath>

namespace eglom::world {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Affine map taking the unit circle at the origin to an ellipse:
/// p' = [a11 a12; a21 a22] p + (tx, ty).
struct EllipseSymbol {
    double a11 = 1.0, a12 = 0.0, a21 = 0.0, a22 = 1.0;
    double tx = 0.0, ty = 0.0;

    static constexpr std::size_t kSize = 6;

    std::array<double, 6> to_array() const { return {a11, a12, a21, a22, tx, ty}; }
    static EllipseSymbol from_array(const std::array<double, 6>& v) {
        return {v[0], v[1], v[2], v[3], v[4], v[5]};
    }
    template <class Range>
    static EllipseSymbol from_range(const Range& v) {
        return {v[0], v[1], v[2], v[3], v[4], v[5]};
    }

    double determinant() const { return a11 * a22 - a12 * a21; }
    Point center() const { return {tx, ty}; }
    Point apply(Point p) const { return {a11 * p.x + a12 * p.y + tx, a21 * p.x + a22 * p.y + ty}; }

    /// Finite entries and a non-degenerate linear part.
    bool valid() const;

    friend bool operator==(const EllipseSymbol&, const EllipseSymbol&) = default;
};

/// outer o inner: first apply inner, then outer.
EllipseSymbol compose(const EllipseSymbol& outer, const EllipseSymbol& inner);

/// Rotation, per-axis scale and translation of an object instance. No shear.
struct ObjectPose {
    double tx = 0.0, ty = 0.0;
    double rotation = 0.0;  // radians
    double sx = 1.0, sy = 1.0;

    friend bool operator==(const ObjectPose&, const ObjectPose&) = default;
};

/// Linear part Rotation(theta) * diag(sx, sy), translation (tx, ty), in the
/// coefficient order (a11, a12, a21, a22, tx, ty). Requires sx, sy > 0.
std::array<double, 6> pose_to_affine(const ObjectPose& pose);

inline EllipseSymbol pose_transform(const ObjectPose& pose) {
    return EllipseSymbol::from_array(pose_to_affine(pose));
}

/// Nearest cell centre on a grid of pitch `cell`; ties round away from zero.
inline double snap_to_grid(double coord, double cell) { return std::round(coord / cell) * cell; }

}  // namespace eglom::world
