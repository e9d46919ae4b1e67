#include "qcreg/fidelity.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qcreg/errors.hpp"

namespace qcreg {

CorrespondenceState make_correspondence_state(const PatchGrid &grid, const QCMap &map, const TriMesh &mesh,
                                              double sigma_units) {
    if (!(sigma_units > 0.0)) throw ConfigError("sigma must be positive");
    CorrespondenceState s;
    s.sigma = sigma_units * grid.center_spacing();
    s.moving_centers = grid.centers;
    s.static_centers = grid.centers;
    s.mapped_centers.reserve(grid.size());
    for (const Vec2 &x : grid.centers) s.mapped_centers.push_back(interpolate(mesh, map.positions, x));
    return s;
}

Eigen::MatrixXd correspondence_matrix(const CorrespondenceState &state) {
    const auto m = static_cast<Eigen::Index>(state.mapped_centers.size());
    const auto n = static_cast<Eigen::Index>(state.static_centers.size());
    const double inv_s2 = 1.0 / (state.sigma * state.sigma);
    Eigen::MatrixXd d(m, n);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < m; ++i) {
        for (Eigen::Index j = 0; j < n; ++j) {
            const Vec2 r = state.mapped_centers[static_cast<std::size_t>(i)] - state.static_centers[static_cast<std::size_t>(j)];
            d(i, j) = std::exp(-dot(r, r) * inv_s2);
        }
    }
    return d;
}

namespace {

void require_sparsified(const CorrelationMatrix &c, Eigen::Index rows, Eigen::Index cols) {
    if (c.stage != CorrelationStage::Sparsified) {
        throw StageError("fidelity needs a sparsified correlation matrix, got stage '" +
                         std::string(to_string(c.stage)) + "'");
    }
    if (c.values.rows() != rows || c.values.cols() != cols) {
        throw ShapeError("correlation matrix is " + std::to_string(c.values.rows()) + "x" +
                         std::to_string(c.values.cols()) + ", expected " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    }
}

// Shared body of the exact and spring forms.
VectorField descent(const CorrelationMatrix &c, const CorrespondenceState &state, bool exact) {
    const auto m = static_cast<Eigen::Index>(state.mapped_centers.size());
    const auto n = static_cast<Eigen::Index>(state.static_centers.size());
    require_sparsified(c, m, n);
    const double inv_s2 = 1.0 / (state.sigma * state.sigma);
    VectorField out(static_cast<std::size_t>(m));
    for (Eigen::Index i = 0; i < m; ++i) {
        Vec2 acc;
        for (Eigen::Index j = 0; j < n; ++j) {
            const double cij = c.values(i, j);
            if (cij == 0.0) continue;
            const Vec2 r = state.mapped_centers[static_cast<std::size_t>(i)] - state.static_centers[static_cast<std::size_t>(j)];
            const double dij = std::exp(-dot(r, r) * inv_s2);
            const double k = 4.0 * inv_s2 * cij * cij * (dij - 1.0) * (exact ? dij : 1.0);
            acc += k * r;
        }
        out[static_cast<std::size_t>(i)] = acc;
    }
    return out;
}

} // namespace

double fidelity_energy(const CorrelationMatrix &c, const Eigen::MatrixXd &d) {
    require_sparsified(c, d.rows(), d.cols());
    double e = 0.0;
    for (Eigen::Index i = 0; i < d.rows(); ++i) {
        for (Eigen::Index j = 0; j < d.cols(); ++j) {
            const double cij = c.values(i, j);
            if (cij == 0.0) continue;
            const double r = d(i, j) - 1.0;
            e += cij * cij * r * r;
        }
    }
    return e;
}

double fidelity_energy(const CorrelationMatrix &c, const CorrespondenceState &state) {
    return fidelity_energy(c, correspondence_matrix(state));
}

VectorField fidelity_descent(const CorrelationMatrix &c, const CorrespondenceState &state) {
    return descent(c, state, true);
}

VectorField fidelity_spring_direction(const CorrelationMatrix &c, const CorrespondenceState &state) {
    return descent(c, state, false);
}

VectorField rasterize_descent(const VectorField &per_patch, const PatchGrid &grid, const TriMesh &mesh) {
    if (per_patch.size() != grid.size()) {
        throw ShapeError("descent has " + std::to_string(per_patch.size()) + " patches, grid has " +
                         std::to_string(grid.size()));
    }
    VectorField out(mesh.n_vertices());
    for (std::size_t v = 0; v < out.size(); ++v) out[v] = per_patch[grid.patch_at(mesh.positions[v])];
    return out;
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    std::vector<double> k(static_cast<std::size_t>(2 * radius + 1));
    for (int t = -radius; t <= radius; ++t) {
        k[static_cast<std::size_t>(t + radius)] = std::exp(-0.5 * t * t / (sigma * sigma));
    }
    return k;
}

} // namespace

VectorField gaussian_blur_field(const VectorField &field, int rows, int cols, double sigma) {
    if (field.size() != static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols)) {
        throw ShapeError("field has " + std::to_string(field.size()) + " samples, expected " +
                         std::to_string(rows) + "x" + std::to_string(cols));
    }
    if (!(sigma > 0.0)) throw InvalidDimensionError("smoothing sigma must be positive");
    const std::vector<double> k = gaussian_kernel(sigma);
    const int radius = static_cast<int>(k.size() / 2);
    auto at = [cols](int r, int c) { return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols) + static_cast<std::size_t>(c); };

    VectorField tmp(field.size());
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            Vec2 acc;
            double wsum = 0.0;
            for (int t = std::max(-radius, -c); t <= std::min(radius, cols - 1 - c); ++t) {
                const double w = k[static_cast<std::size_t>(t + radius)];
                acc += w * field[at(r, c + t)];
                wsum += w;
            }
            tmp[at(r, c)] = acc * (1.0 / wsum);
        }
    }
    VectorField out(field.size());
#pragma omp parallel for schedule(static)
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            Vec2 acc;
            double wsum = 0.0;
            for (int t = std::max(-radius, -r); t <= std::min(radius, rows - 1 - r); ++t) {
                const double w = k[static_cast<std::size_t>(t + radius)];
                acc += w * tmp[at(r + t, c)];
                wsum += w;
            }
            out[at(r, c)] = acc * (1.0 / wsum);
        }
    }
    return out;
}

VectorField gaussian_smooth_field(const VectorField &field, int rows, int cols, double image_side) {
    return gaussian_blur_field(field, rows, cols, image_side / 50.0);
}

} // namespace qcreg
