#pragma once

#include <vector>

#include <Eigen/Dense>

#include "qcreg/beltrami.hpp"
#include "qcreg/features.hpp"
#include "qcreg/mesh.hpp"
#include "qcreg/types.hpp"

namespace qcreg {

/// Inputs of the patch correspondence kernel. `sigma` is in pixels here;
/// make_correspondence_state converts from patch-spacing units.
struct CorrespondenceState {
    double sigma = 1.0;
    std::vector<Vec2> moving_centers;
    std::vector<Vec2> static_centers;
    std::vector<Vec2> mapped_centers; // g(x_i)
};

/// Maps the moving centres through `map` by piecewise-linear interpolation.
/// `sigma_units` is measured in patch-centre spacings.
CorrespondenceState make_correspondence_state(const PatchGrid &grid, const QCMap &map, const TriMesh &mesh,
                                              double sigma_units);

/// D_ij = exp(-|g(x_i) - x_j|^2 / sigma^2).
Eigen::MatrixXd correspondence_matrix(const CorrespondenceState &state);

/// sum_ij C_ij^2 (D_ij - 1)^2. C must be sparsified.
double fidelity_energy(const CorrelationMatrix &c, const Eigen::MatrixXd &d);
double fidelity_energy(const CorrelationMatrix &c, const CorrespondenceState &state);

/// Exact negative gradient of fidelity_energy with respect to each g(x_i):
/// (4 / sigma^2) sum_j C_ij^2 (D_ij - 1) D_ij (g(x_i) - x_j).
VectorField fidelity_descent(const CorrelationMatrix &c, const CorrespondenceState &state);

/// Spring form (4 / sigma^2) sum_j C_ij^2 (D_ij - 1) (g(x_i) - x_j). Each row of
/// C has at most one nonzero, so this is fidelity_descent rescaled per patch by
/// 1 / D_ij > 0: still a descent direction, but it keeps pulling when the
/// centres are many sigma apart and the exact gradient has vanished.
VectorField fidelity_spring_direction(const CorrelationMatrix &c, const CorrespondenceState &state);

/// Piecewise-constant splat: each vertex takes the vector of the patch containing it.
VectorField rasterize_descent(const VectorField &per_patch, const PatchGrid &grid, const TriMesh &mesh);

/// Componentwise Gaussian blur of a rows x cols vertex field with standard
/// deviation image_side / 50, truncated at 3 sigma. The kernel is renormalized
/// over the in-range samples, so constants are preserved up to the border.
VectorField gaussian_smooth_field(const VectorField &field, int rows, int cols, double image_side);

/// Same, with an explicit standard deviation in samples.
VectorField gaussian_blur_field(const VectorField &field, int rows, int cols, double sigma);

} // namespace qcreg
