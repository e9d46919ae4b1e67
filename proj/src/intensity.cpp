#include "qcreg/intensity.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <string>

#include "qcreg/errors.hpp"
#include "qcreg/fidelity.hpp"

namespace qcreg {

namespace {

void require_map_on(const QCMap &map, const Image &image) {
    if (map.height != image.height || map.width != image.width ||
        map.positions.size() != static_cast<std::size_t>(image.height + 1) * static_cast<std::size_t>(image.width + 1)) {
        throw ShapeError("map is " + std::to_string(map.height) + "x" + std::to_string(map.width) + ", image is " +
                         std::to_string(image.height) + "x" + std::to_string(image.width));
    }
}

void require_same_size(const Image &a, const Image &b) {
    if (a.height != b.height || a.width != b.width) {
        throw ShapeError("images differ in size: " + std::to_string(a.height) + "x" + std::to_string(a.width) +
                         " vs " + std::to_string(b.height) + "x" + std::to_string(b.width));
    }
}

std::size_t vertex_of(const Image &image, int r, int c) {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(image.width + 1) + static_cast<std::size_t>(c);
}

} // namespace

Image warp_image(const QCMap &map, const Image &image) {
    require_map_on(map, image);
    Image out(image.height, image.width);
#pragma omp parallel for schedule(static)
    for (int r = 0; r < image.height; ++r) {
        for (int c = 0; c < image.width; ++c) out.at(r, c) = sample_image(image, map.positions[vertex_of(image, r, c)]);
    }
    return out;
}

VectorField intensity_descent(const Image &moving, const Image &fixed, const QCMap &map) {
    require_same_size(moving, fixed);
    require_map_on(map, fixed);
    VectorField out(map.positions.size());
#pragma omp parallel for schedule(static)
    for (int r = 0; r < fixed.height; ++r) {
        for (int c = 0; c < fixed.width; ++c) {
            const std::size_t v = vertex_of(fixed, r, c);
            const Vec2 p = map.positions[v];
            const double res = moving.at(r, c) - sample_image(fixed, p);
            out[v] = 2.0 * res * sample_gradient(fixed, p);
        }
    }
    return out;
}

double intensity_energy(const Image &moving, const Image &fixed, const QCMap &map) {
    require_same_size(moving, fixed);
    require_map_on(map, fixed);
    double e = 0.0;
    for (int r = 0; r < fixed.height; ++r) {
        double row = 0.0;
        for (int c = 0; c < fixed.width; ++c) {
            const double res = moving.at(r, c) - sample_image(fixed, map.positions[vertex_of(fixed, r, c)]);
            row += res * res;
        }
        e += row;
    }
    return e;
}

VectorField demon_force(const Image &moving, const Image &warped_static, double alpha) {
    require_same_size(moving, warped_static);
    if (!(alpha > 0.0)) throw InvalidDimensionError("demon alpha must be positive");
    const ImageGradient gs = image_gradient(warped_static);
    const ImageGradient gm = image_gradient(moving);
    const double a2 = alpha * alpha;
    VectorField out(moving.size());
#pragma omp parallel for schedule(static)
    for (int r = 0; r < moving.height; ++r) {
        for (int c = 0; c < moving.width; ++c) {
            const double d = moving.at(r, c) - warped_static.at(r, c);
            const Vec2 s{gs.gx.at(r, c), gs.gy.at(r, c)};
            const Vec2 m{gm.gx.at(r, c), gm.gy.at(r, c)};
            Vec2 u;
            const double ds = dot(s, s) + a2 * d * d;
            if (ds >= 1e-12) u += (d / ds) * s;
            const double dm = dot(m, m) + a2 * d * d;
            if (dm >= 1e-12) u += (d / dm) * m;
            out[static_cast<std::size_t>(r) * static_cast<std::size_t>(moving.width) + static_cast<std::size_t>(c)] = u;
        }
    }
    return out;
}

VectorField pixels_to_vertices(const VectorField &pixel_field, int height, int width) {
    if (pixel_field.size() != static_cast<std::size_t>(height) * static_cast<std::size_t>(width)) {
        throw ShapeError("pixel field does not match " + std::to_string(height) + "x" + std::to_string(width));
    }
    VectorField out(static_cast<std::size_t>(height + 1) * static_cast<std::size_t>(width + 1));
    for (int i = 0; i <= height; ++i) {
        const int r = std::min(i, height - 1);
        for (int j = 0; j <= width; ++j) {
            const int c = std::min(j, width - 1);
            out[static_cast<std::size_t>(i) * static_cast<std::size_t>(width + 1) + static_cast<std::size_t>(j)] =
                pixel_field[static_cast<std::size_t>(r) * static_cast<std::size_t>(width) + static_cast<std::size_t>(c)];
        }
    }
    return out;
}

VectorField demons_refine_step(const Image &moving, const Image &fixed, const QCMap &map, double alpha, int steps,
                               double smoothing_side) {
    require_same_size(moving, fixed);
    require_map_on(map, fixed);
    const double side = smoothing_side > 0.0 ? smoothing_side : std::max(fixed.height, fixed.width);
    VectorField acc(map.positions.size());
    QCMap trial = map;
    for (int s = 0; s < steps; ++s) {
        const Image warped = warp_image(trial, fixed);
        const VectorField u = pixels_to_vertices(demon_force(moving, warped, alpha), fixed.height, fixed.width);
        const VectorField smooth = gaussian_smooth_field(u, fixed.height + 1, fixed.width + 1, side);
        for (std::size_t v = 0; v < acc.size(); ++v) {
            acc[v] += smooth[v];
            trial.positions[v] = map.positions[v] + acc[v];
        }
    }
    return acc;
}

Image histogram_match(const Image &source, const Image &reference) {
    constexpr int kBins = 256;
    auto bin_of = [](double v) { return std::clamp(static_cast<int>(v * kBins), 0, kBins - 1); };
    std::array<double, kBins> hs{}, cref{};
    for (double v : source.pixels) hs[static_cast<std::size_t>(bin_of(v))] += 1.0;
    for (double v : reference.pixels) cref[static_cast<std::size_t>(bin_of(v))] += 1.0;
    const double ns = static_cast<double>(source.size());
    const double nr = static_cast<double>(reference.size());
    for (int b = 1; b < kBins; ++b) cref[static_cast<std::size_t>(b)] += cref[static_cast<std::size_t>(b - 1)];

    // Each source bin maps to the reference bin holding the quantile of its midpoint.
    std::array<double, kBins> lut{};
    double below = 0.0;
    for (int b = 0; b < kBins; ++b) {
        const double h = hs[static_cast<std::size_t>(b)];
        const double q = (below + 0.5 * h) / ns;
        int target = 0;
        while (target < kBins - 1 && cref[static_cast<std::size_t>(target)] / nr < q) ++target;
        lut[static_cast<std::size_t>(b)] = (target + 0.5) / kBins;
        below += h;
    }
    Image out(source.height, source.width);
    for (std::size_t k = 0; k < source.size(); ++k) out.pixels[k] = lut[static_cast<std::size_t>(bin_of(source.pixels[k]))];
    return out;
}

} // namespace qcreg
