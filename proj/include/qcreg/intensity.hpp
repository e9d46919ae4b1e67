#pragma once

#include "qcreg/beltrami.hpp"
#include "qcreg/image.hpp"
#include "qcreg/mesh.hpp"
#include "qcreg/types.hpp"

namespace qcreg {

/// Pull-back: output(r, c) = sample_image(image, f(vertex(r, c))). The map must
/// live on the h x w mesh of the image.
Image warp_image(const QCMap &map, const Image &image);

/// Negative gradient of sum_p (I_M(p) - I_S(f(p)))^2 with respect to the
/// vertex positions: 2 (I_M - I_S(f)) grad I_S(f), with grad I_S the derivative
/// of the bilinear interpolant (sample_gradient). On the pixel grid this is the
/// central difference. Vertices on the last row/column carry no pixel and get 0.
VectorField intensity_descent(const Image &moving, const Image &fixed, const QCMap &map);

/// sum_p (I_M(p) - I_S(f(p)))^2.
double intensity_energy(const Image &moving, const Image &fixed, const QCMap &map);

/// Modified demon force per pixel,
///   u = d grad S / (|grad S|^2 + a^2 d^2) + d grad M / (|grad M|^2 + a^2 d^2),  d = M - S,
/// where S is the already-warped static image. Terms with a denominator below
/// 1e-12 contribute nothing. |u| <= 1 / alpha.
VectorField demon_force(const Image &moving, const Image &warped_static, double alpha);

/// Copies a per-pixel field onto the (h+1) x (w+1) vertices, the extra row and
/// column repeating their neighbours.
VectorField pixels_to_vertices(const VectorField &pixel_field, int height, int width);

/// `steps` demons iterations from `map`: each warps the static image by the
/// accumulated map, computes demon_force, lifts it to vertices and smooths it
/// with gaussian_smooth_field (`smoothing_side` = 0 uses the image side).
/// Returns the accumulated per-vertex displacement.
VectorField demons_refine_step(const Image &moving, const Image &fixed, const QCMap &map, double alpha,
                               int steps = 1, double smoothing_side = 0.0);

/// 256-bin quantile mapping of `source` onto the histogram of `reference`.
Image histogram_match(const Image &source, const Image &reference);

} // namespace qcreg
