#pragma once

#include <cstddef>
#include <string>

#include "qcreg/beltrami.hpp"
#include "qcreg/image.hpp"

namespace qcreg {

/// (sum |I_M - I_S(f)| / 2) (1/sum I_M + 1/sum(1 - I_M) + 1/sum I_S(f) + 1/sum(1 - I_S(f))).
/// Throws DegenerateImageError naming the first vanishing sum.
double e_sim(const Image &moving, const Image &fixed, const QCMap &map);

/// Same, on an already warped static image.
double e_sim_warped(const Image &moving, const Image &warped_static);

/// (1 / mn) sqrt(sum |df/dx|^2 + |df/dy|^2) over the m x n pixel samples, using
/// forward differences of the mapped positions.
double e_smooth(const QCMap &map);

inline double e_total(double sim, double smooth) noexcept { return sim + smooth; }

/// Splits the image rectangle into h x w squares, two triangles each, maps the
/// corners through `map` by piecewise-linear interpolation and counts triangles
/// with signed area <= 0.
std::size_t count_flips(const QCMap &map, int h, int w);
inline std::size_t count_flips(const QCMap &map) { return count_flips(map, map.height, map.width); }

struct MetricsReport {
    double e_sim = 0.0;
    double e_smooth = 0.0;
    double e_total = 0.0;
    std::size_t n_flips = 0;
    int height = 0;
    int width = 0;
};

MetricsReport evaluate(const Image &moving, const Image &fixed, const QCMap &map);

/// JSON object with keys e_sim, e_smooth, e_total, n_flips, height, width,
/// plus an optional pre-serialized "config" object.
std::string to_json(const MetricsReport &report, const std::string &config_json = {});

} // namespace qcreg
