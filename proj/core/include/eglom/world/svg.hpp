#pragma once

#include "eglom/world/scene.hpp"

#include <string>
#include <vector>

namespace eglom::world {

struct SvgOptions {
    double extent = 1.6;     // half-width of the viewed region, scene units
    double pixels = 480.0;   // output width and height
    bool draw_grid = false;
    double cell = 0.05;
};

/// Each ellipse is a unit circle under its affine map. Ground truth is green,
/// input red, predictions (one per location, optional) blue. Every object
/// instance gets its own <g class="object"> element.
std::string render_scene_svg(const Scene& scene,
                             const std::vector<EllipseSymbol>* predictions = nullptr,
                             const SvgOptions& options = {});

/// Several ellipse sets side by side, one panel each, e.g. the decoded
/// objects of an embedding sweep.
std::string render_strip_svg(const std::vector<std::vector<EllipseSymbol>>& panels,
                             const std::vector<std::string>& captions,
                             const SvgOptions& options = {});

/// The <circle> element drawing one symbol under its affine transform.
std::string svg_ellipse(const EllipseSymbol& e, const std::string& colour);

}  // namespace eglom::world
