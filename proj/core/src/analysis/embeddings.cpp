#include "eglom/analysis/embeddings.hpp"

#include "eglom/world/svg.hpp"

#include <Eigen/SVD>
#include <cmath>
#include <iomanip>
#include <json.hpp>
#include <limits>
#include <sstream>

namespace eglom::analysis {

using nlohmann::json;

std::size_t export_embeddings(const net::EglomModel& model, std::span<const world::Scene> scenes,
                              std::ostream& out) {
    std::size_t count = 0;
    for (std::size_t s = 0; s < scenes.size(); ++s) {
        const world::Scene& scene = scenes[s];
        const net::Batch batch = net::make_batch(std::vector<world::Scene>{scene}, model.hyper());
        ad::Tape tape;
        const net::Trajectory traj = net::forward(tape, model, batch);
        for (std::size_t t = 0; t < traj.states.size(); ++t) {
            for (std::size_t i = 0; i < scene.size(); ++i) {
                const world::Location& loc = scene.locations[i];
                for (const char* level : {"ellipse", "object"}) {
                    const ad::Tensor& v = std::string(level) == "ellipse"
                                              ? traj.states[t].ellipse.value()
                                              : traj.states[t].object.value();
                    const auto row = v.row(i);
                    json j = json::object();
                    j["scene"] = s;
                    j["iter"] = t;
                    j["loc"] = i;
                    j["level"] = level;
                    j["label"] = loc.instance;
                    j["cell"] = {loc.cell_x, loc.cell_y};
                    j["vec"] = std::vector<double>(row.begin(), row.end());
                    out << j.dump() << '\n';
                    ++count;
                }
            }
        }
    }
    if (!out) throw std::runtime_error("failed writing embedding dump");
    return count;
}

std::vector<EmbeddingRecord> read_embeddings(std::istream& in) {
    std::vector<EmbeddingRecord> out;
    std::string line;
    std::size_t number = 0;
    while (std::getline(in, line)) {
        ++number;
        if (line.empty()) continue;
        try {
            const json j = json::parse(line);
            EmbeddingRecord r;
            r.scene = j.at("scene").get<std::size_t>();
            r.iteration = j.at("iter").get<std::size_t>();
            r.location = j.at("loc").get<std::size_t>();
            r.level = j.at("level").get<std::string>();
            r.label = j.at("label").get<int>();
            r.cell = {j.at("cell").at(0).get<double>(), j.at("cell").at(1).get<double>()};
            r.vec = j.at("vec").get<std::vector<double>>();
            out.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw std::runtime_error("embedding dump line " + std::to_string(number) + ": " + e.what());
        }
    }
    return out;
}

std::vector<double> SvdBasis::project(std::span<const double> x) const {
    if (x.size() != mean.size()) throw ad::DimensionError("projection of a vector of wrong length");
    std::vector<double> c(vectors.size(), 0.0);
    for (std::size_t k = 0; k < vectors.size(); ++k) {
        for (std::size_t d = 0; d < x.size(); ++d) c[k] += (x[d] - mean[d]) * vectors[k][d];
    }
    return c;
}

std::vector<double> SvdBasis::reconstruct(std::span<const double> coords) const {
    if (coords.size() != vectors.size()) throw ad::DimensionError("wrong number of coordinates");
    std::vector<double> x = mean;
    for (std::size_t k = 0; k < coords.size(); ++k) {
        for (std::size_t d = 0; d < x.size(); ++d) x[d] += coords[k] * vectors[k][d];
    }
    return x;
}

SvdBasis svd_basis(const ad::Tensor& samples) {
    const auto n = Eigen::Index(samples.rows());
    const auto dim = Eigen::Index(samples.cols());
    if (n < 1 || dim < 1) throw std::invalid_argument("svd_basis needs at least one sample");
    Eigen::MatrixXd x = samples.mat();
    const Eigen::RowVectorXd mu = x.colwise().mean();
    x.rowwise() -= mu;
    Eigen::BDCSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
    const Eigen::VectorXd& s = svd.singularValues();
    const double tol = double(std::max(n, dim)) * std::numeric_limits<double>::epsilon() *
                       (s.size() ? s(0) : 0.0);
    SvdBasis b;
    b.mean.assign(mu.data(), mu.data() + dim);
    for (Eigen::Index k = 0; k < s.size(); ++k) {
        if (!(s(k) > tol)) break;
        b.singular_values.push_back(s(k));
        const Eigen::VectorXd v = svd.matrixV().col(k);
        b.vectors.emplace_back(v.data(), v.data() + dim);
    }
    b.rank = b.vectors.size();
    b.truncated = b.rank < std::size_t(std::min(n, dim));
    return b;
}

std::string_view pose_field_name(PoseField f) {
    switch (f) {
        case PoseField::x: return "x";
        case PoseField::y: return "y";
        case PoseField::sx: return "sx";
        case PoseField::sy: return "sy";
        case PoseField::rotation: return "rotation";
    }
    return "?";
}

PoseField parse_pose_field(std::string_view name) {
    for (PoseField f : {PoseField::x, PoseField::y, PoseField::sx, PoseField::sy, PoseField::rotation}) {
        if (pose_field_name(f) == name) return f;
    }
    throw std::invalid_argument("unknown pose field '" + std::string(name) + "'");
}

double pose_field_value(const world::ObjectPose& pose, PoseField f) {
    switch (f) {
        case PoseField::x: return pose.tx;
        case PoseField::y: return pose.ty;
        case PoseField::sx: return pose.sx;
        case PoseField::sy: return pose.sy;
        case PoseField::rotation: return pose.rotation;
    }
    return 0.0;
}

std::optional<double> pearson(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) return std::nullopt;
    const double n = double(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxy += (x[i] - mx) * (y[i] - my);
        sxx += (x[i] - mx) * (x[i] - mx);
        syy += (y[i] - my) * (y[i] - my);
    }
    // Relative to the data scale, so rounding noise around a constant does not
    // count as variation.
    auto flat = [n](double ss, double m) { return ss <= 1e-24 * n * std::max(1.0, m * m); };
    if (flat(sxx, mx) || flat(syy, my)) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

std::vector<Correlation> basis_pose_correlation(const ad::Tensor& samples,
                                                std::span<const world::ObjectPose> poses,
                                                const SvdBasis& basis, PoseField field) {
    if (poses.size() != samples.rows()) throw ad::DimensionError("one pose per sample expected");
    std::vector<std::vector<double>> proj(basis.vectors.size(), std::vector<double>(samples.rows()));
    for (std::size_t i = 0; i < samples.rows(); ++i) {
        const auto c = basis.project(samples.row(i));
        for (std::size_t k = 0; k < c.size(); ++k) proj[k][i] = c[k];
    }
    std::vector<std::vector<double>> targets;
    if (field == PoseField::rotation) {
        std::vector<double> s, c;
        for (const auto& p : poses) {
            s.push_back(std::sin(p.rotation));
            c.push_back(std::cos(p.rotation));
        }
        targets = {s, c};
    } else {
        std::vector<double> v;
        for (const auto& p : poses) v.push_back(pose_field_value(p, field));
        targets = {v};
    }
    std::vector<Correlation> out;
    for (std::size_t k = 0; k < proj.size(); ++k) {
        Correlation c;
        c.basis_index = k;
        c.singular_value = basis.singular_values[k];
        c.field = field;
        c.degenerate = true;
        for (const auto& t : targets) {
            if (const auto r = pearson(proj[k], t)) {
                if (c.degenerate || std::abs(*r) > std::abs(c.r)) c.r = *r;
                c.degenerate = false;
            }
        }
        out.push_back(c);
    }
    return out;
}

void write_correlation_csv(const std::vector<Correlation>& rows, std::ostream& out) {
    out << "basis_index,singular_value,field,r\n" << std::setprecision(10);
    for (const auto& c : rows) {
        out << c.basis_index << ',' << c.singular_value << ',' << pose_field_name(c.field) << ','
            << c.r << '\n';
    }
}

EmbeddingSamples collect_object_samples(const net::EglomModel& model,
                                        std::span<const world::Scene> scenes,
                                        std::size_t max_samples) {
    EmbeddingSamples out;
    std::vector<double> flat;
    const std::size_t D = model.hyper().embedding_dim;
    constexpr std::size_t kChunk = 64;
    for (std::size_t b = 0; b < scenes.size() && out.poses.size() < max_samples; b += kChunk) {
        const std::size_t e = std::min(scenes.size(), b + kChunk);
        std::vector<const world::Scene*> ptrs;
        for (std::size_t i = b; i < e; ++i) ptrs.push_back(&scenes[i]);
        const net::Batch batch = net::make_batch(std::span<const world::Scene* const>(ptrs), model.hyper());
        ad::Tape tape;
        const net::Trajectory traj = net::forward(tape, model, batch);
        const ad::Tensor& obj = traj.states.back().object.value();
        std::size_t row = 0;
        for (const world::Scene* s : ptrs) {
            for (std::size_t i = 0; i < s->size(); ++i, ++row) {
                if (out.poses.size() >= max_samples) break;
                const auto v = obj.row(row);
                flat.insert(flat.end(), v.begin(), v.end());
                const auto& inst = s->objects[std::size_t(s->locations[i].instance)];
                out.poses.push_back(inst.pose);
                out.classes.push_back(inst.class_index);
            }
        }
    }
    out.embeddings = ad::Tensor({out.poses.size(), D}, std::move(flat));
    return out;
}

std::vector<ModifiedSymbol> embedding_modification(const net::EglomModel& model,
                                                   std::span<const double> embedding,
                                                   std::size_t index,
                                                   std::span<const double> deltas) {
    const std::size_t D = model.hyper().embedding_dim;
    if (embedding.size() != D) throw ad::DimensionError("embedding length differs from the model's");
    if (index >= D) {
        throw std::out_of_range("coordinate " + std::to_string(index) + " outside embedding of size " +
                                std::to_string(D));
    }
    ad::Tensor batch = ad::Tensor::matrix(deltas.size(), D);
    for (std::size_t r = 0; r < deltas.size(); ++r) {
        std::copy(embedding.begin(), embedding.end(), batch.row(r).begin());
        batch(r, index) += deltas[r];
    }
    ad::Tape tape;
    const ad::Tensor& head =
        model.object_head().forward(tape, model.params(), tape.constant(std::move(batch))).value();
    std::vector<ModifiedSymbol> out;
    for (std::size_t r = 0; r < deltas.size(); ++r) {
        ModifiedSymbol m;
        m.delta = deltas[r];
        for (std::size_t k = 0; k < 6; ++k) m.pose[k] = head(r, k);
        const auto logits = head.row(r).subspan(6);
        m.probabilities = ad::softmax(logits);
        out.push_back(std::move(m));
    }
    return out;
}

std::string render_modification_svg(const std::vector<ModifiedSymbol>& symbols,
                                    const std::vector<world::ObjectTemplate>& templates) {
    std::vector<std::vector<world::EllipseSymbol>> panels;
    std::vector<std::string> captions;
    for (const auto& m : symbols) {
        const auto best = std::size_t(
            std::max_element(m.probabilities.begin(), m.probabilities.end()) - m.probabilities.begin());
        const world::EllipseSymbol pose = world::EllipseSymbol::from_array(m.pose);
        std::vector<world::EllipseSymbol> panel;
        for (const auto& t : templates) {
            if (std::size_t(t.class_index) != best) continue;
            for (const auto& part : t.parts) panel.push_back(world::compose(pose, part));
            break;
        }
        panels.push_back(std::move(panel));
        std::ostringstream cap;
        cap << std::setprecision(3) << "delta " << m.delta << ", p " << m.probabilities[best];
        captions.push_back(cap.str());
    }
    return world::render_strip_svg(panels, captions, {});
}

}  // namespace eglom::analysis
