#include "qcreg/metrics.hpp"

#include <cmath>
#include <string>

#include <json.hpp>

#include "qcreg/errors.hpp"
#include "qcreg/intensity.hpp"
#include "qcreg/mesh.hpp"

namespace qcreg {

double e_sim_warped(const Image &moving, const Image &warped) {
    if (moving.height != warped.height || moving.width != warped.width) {
        throw ShapeError("e_sim needs images of equal size");
    }
    double diff = 0.0, sm = 0.0, sm1 = 0.0, ss = 0.0, ss1 = 0.0;
    for (std::size_t k = 0; k < moving.size(); ++k) {
        const double a = moving.pixels[k], b = warped.pixels[k];
        diff += std::abs(a - b);
        sm += a;
        sm1 += 1.0 - a;
        ss += b;
        ss1 += 1.0 - b;
    }
    const struct {
        double value;
        const char *name;
    } sums[] = {{sm, "sum(I_M)"}, {sm1, "sum(1 - I_M)"}, {ss, "sum(I_S(f))"}, {ss1, "sum(1 - I_S(f))"}};
    double factor = 0.0;
    for (const auto &s : sums) {
        if (!(s.value > 0.0)) throw DegenerateImageError(std::string(s.name) + " is zero");
        factor += 1.0 / s.value;
    }
    return 0.5 * diff * factor;
}

double e_sim(const Image &moving, const Image &fixed, const QCMap &map) {
    return e_sim_warped(moving, warp_image(map, fixed));
}

double e_smooth(const QCMap &map) {
    const int h = map.height, w = map.width;
    if (map.positions.size() != static_cast<std::size_t>(h + 1) * static_cast<std::size_t>(w + 1)) {
        throw ShapeError("map payload does not match its dimensions");
    }
    auto at = [&](int i, int j) { return map.positions[static_cast<std::size_t>(i) * static_cast<std::size_t>(w + 1) + static_cast<std::size_t>(j)]; };
    double sum = 0.0;
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const Vec2 dx = at(i, j + 1) - at(i, j);
            const Vec2 dy = at(i + 1, j) - at(i, j);
            sum += dot(dx, dx) + dot(dy, dy);
        }
    }
    return std::sqrt(sum) / (static_cast<double>(h) * static_cast<double>(w));
}

std::size_t count_flips(const QCMap &map, int h, int w) {
    if (h < 1 || w < 1) throw InvalidDimensionError("flip grid needs at least one square per side");
    if (map.height < 1 || map.width < 1 ||
        map.positions.size() != static_cast<std::size_t>(map.height + 1) * static_cast<std::size_t>(map.width + 1)) {
        throw ShapeError("map payload does not match its dimensions");
    }
    const bool native = (h == map.height && w == map.width);
    TriMesh mesh;
    if (!native) mesh = build_grid_mesh(map.height, map.width);
    const double sx = static_cast<double>(map.width) / w, sy = static_cast<double>(map.height) / h;
    auto corner = [&](int i, int j) {
        if (native) {
            return map.positions[static_cast<std::size_t>(i) * static_cast<std::size_t>(map.width + 1) +
                                 static_cast<std::size_t>(j)];
        }
        return interpolate(mesh, map.positions, {j * sx, i * sy});
    };
    std::size_t flips = 0;
    for (int i = 0; i < h; ++i) {
        for (int j = 0; j < w; ++j) {
            const Vec2 p00 = corner(i, j), p01 = corner(i, j + 1), p10 = corner(i + 1, j), p11 = corner(i + 1, j + 1);
            // Same diagonal as the mesh: (x0,y0)(x1,y0)(x0,y1) and (x1,y0)(x1,y1)(x0,y1).
            if (signed_area(p00, p01, p10) <= 0.0) ++flips;
            if (signed_area(p01, p11, p10) <= 0.0) ++flips;
        }
    }
    return flips;
}

MetricsReport evaluate(const Image &moving, const Image &fixed, const QCMap &map) {
    MetricsReport r;
    r.e_sim = e_sim(moving, fixed, map);
    r.e_smooth = e_smooth(map);
    r.e_total = e_total(r.e_sim, r.e_smooth);
    r.n_flips = count_flips(map);
    r.height = map.height;
    r.width = map.width;
    return r;
}

std::string to_json(const MetricsReport &report, const std::string &config_json) {
    nlohmann::ordered_json j;
    j["e_sim"] = report.e_sim;
    j["e_smooth"] = report.e_smooth;
    j["e_total"] = report.e_total;
    j["n_flips"] = report.n_flips;
    j["height"] = report.height;
    j["width"] = report.width;
    if (!config_json.empty()) j["config"] = nlohmann::ordered_json::parse(config_json);
    return j.dump(2) + "\n";
}

} // namespace qcreg
