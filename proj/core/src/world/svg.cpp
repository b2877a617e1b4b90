#include "eglom/world/svg.hpp"

#include <iomanip>
#include <sstream>

namespace eglom::world {

namespace {

std::string header(double width, double height, double extent, double panels) {
    std::ostringstream os;
    os << std::setprecision(17);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width << "\" height=\"" << height
       << "\" viewBox=\"" << -extent << ' ' << -extent << ' ' << 2 * extent * panels << ' '
       << 2 * extent << "\">\n";
    return os.str();
}

}  // namespace

std::string svg_ellipse(const EllipseSymbol& e, const std::string& colour) {
    // SVG matrix(a b c d e f) maps (x, y) to (a x + c y + e, b x + d y + f).
    std::ostringstream os;
    os << std::setprecision(17);
    os << "<circle cx=\"0\" cy=\"0\" r=\"1\" fill=\"none\" stroke=\"" << colour
       << "\" vector-effect=\"non-scaling-stroke\" transform=\"matrix(" << e.a11 << ' ' << e.a21
       << ' ' << e.a12 << ' ' << e.a22 << ' ' << e.tx << ' ' << e.ty << ")\"/>";
    return os.str();
}

std::string render_scene_svg(const Scene& scene, const std::vector<EllipseSymbol>* predictions,
                             const SvgOptions& opt) {
    std::ostringstream os;
    os << header(opt.pixels, opt.pixels, opt.extent, 1.0);
    // Scene y points up; SVG y points down.
    os << "<g transform=\"scale(1 -1)\">\n";
    if (opt.draw_grid) {
        os << "<g class=\"grid\" stroke=\"#ddd\" stroke-width=\"0.002\">\n";
        for (double v = -opt.extent; v <= opt.extent; v += opt.cell) {
            const double e = v + opt.cell / 2;
            os << "<line x1=\"" << e << "\" y1=\"" << -opt.extent << "\" x2=\"" << e << "\" y2=\""
               << opt.extent << "\"/>\n";
            os << "<line x1=\"" << -opt.extent << "\" y1=\"" << e << "\" x2=\"" << opt.extent
               << "\" y2=\"" << e << "\"/>\n";
        }
        os << "</g>\n";
    }
    for (std::size_t o = 0; o < scene.objects.size(); ++o) {
        os << "<g class=\"object\" data-instance=\"" << o << "\" data-class=\""
           << scene.objects[o].class_index << "\">\n";
        for (std::size_t i = 0; i < scene.locations.size(); ++i) {
            const Location& loc = scene.locations[i];
            if (loc.instance != int(o)) continue;
            os << svg_ellipse(loc.truth, "green") << '\n';
            os << svg_ellipse(loc.input, "red") << '\n';
            if (predictions && i < predictions->size()) {
                os << svg_ellipse((*predictions)[i], "blue") << '\n';
            }
        }
        os << "</g>\n";
    }
    os << "</g>\n</svg>\n";
    return os.str();
}

std::string render_strip_svg(const std::vector<std::vector<EllipseSymbol>>& panels,
                             const std::vector<std::string>& captions, const SvgOptions& opt) {
    const double n = panels.empty() ? 1.0 : double(panels.size());
    std::ostringstream os;
    os << std::setprecision(17);
    os << header(opt.pixels * n, opt.pixels, opt.extent, n);
    for (std::size_t p = 0; p < panels.size(); ++p) {
        const double dx = 2 * opt.extent * double(p);
        os << "<g class=\"panel\" transform=\"translate(" << dx << " 0)\">\n";
        if (p < captions.size()) {
            os << "<text x=\"" << -opt.extent * 0.95 << "\" y=\"" << -opt.extent * 0.9
               << "\" font-size=\"" << opt.extent * 0.08 << "\">" << captions[p] << "</text>\n";
        }
        os << "<g transform=\"scale(1 -1)\">\n";
        for (const auto& e : panels[p]) os << svg_ellipse(e, "blue") << '\n';
        os << "</g>\n</g>\n";
    }
    os << "</svg>\n";
    return os.str();
}

}  // namespace eglom::world
