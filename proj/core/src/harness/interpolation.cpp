#include "eglom/harness/interpolation.hpp"

#include <cmath>
#include <stdexcept>

namespace eglom::harness {

std::vector<DistanceBin> interpolation_eval(const Predictions& preds,
                                            std::span<const world::Scene> scenes, double width_deg) {
    if (!(width_deg > 0.0)) throw std::invalid_argument("bin width must be positive");
    if (preds.offsets.size() != scenes.size() + 1) {
        throw std::invalid_argument("predictions do not belong to these scenes");
    }
    const auto bins = std::size_t(std::ceil(45.0 / width_deg - 1e-9));
    std::vector<DistanceBin> out;
    for (std::size_t b = 0; b < bins; ++b) {
        DistanceBin bin;
        bin.lo_deg = double(b) * width_deg;
        bin.hi_deg = std::min(45.0, double(b + 1) * width_deg);
        auto keep = [&](std::size_t s, std::size_t i) {
            const world::Scene& scene = scenes[s];
            const double d = scene.objects[std::size_t(scene.locations[i].instance)].rotation_distance_deg;
            return d > bin.lo_deg && d <= bin.hi_deg;
        };
        bool any = false;
        for (std::size_t s = 0; s < scenes.size() && !any; ++s) {
            for (std::size_t i = 0; i < scenes[s].size() && !any; ++i) any = keep(s, i);
        }
        if (any) bin.metrics = metrics_from(preds, scenes, keep);
        out.push_back(std::move(bin));
    }
    return out;
}

}  // namespace eglom::harness
