#pragma once

#include <memory>
#include <span>
#include <vector>

#include "qcreg/beltrami.hpp"
#include "qcreg/mesh.hpp"

namespace qcreg {

/// Per-face entries of the symmetric matrix A = [[a1, a2], [a2, a3]].
struct LbsCoefficients {
    std::vector<double> alpha1;
    std::vector<double> alpha2;
    std::vector<double> alpha3;
};

/// Throws NearSingularError when |mu| >= 1 - 1e-9 on a face.
LbsCoefficients lbs_coefficients(const BeltramiField &mu);

/// Dirichlet constraints: vertex indices and their target positions.
struct BoundaryCondition {
    std::vector<int> vertices;
    std::vector<Vec2> targets;

    /// Every rectangle-boundary vertex pinned to its rest position.
    static BoundaryCondition identity(const TriMesh &mesh);
    /// Every rectangle-boundary vertex pinned to where `positions` puts it.
    static BoundaryCondition from_positions(const TriMesh &mesh, std::span<const Vec2> positions);
};

/// Throws InvalidDimensionError unless there are >= 3 non-collinear targets
/// and all indices are valid and distinct.
void validate(const BoundaryCondition &bc, const TriMesh &mesh);

/// Reusable solver for div(A grad u) = div(A grad v) = 0 with P1 elements and
/// a fixed set of constrained vertices. The sparsity pattern is analysed once;
/// each solve refactorizes numerically.
class LbsSolver {
public:
    LbsSolver(const TriMesh &mesh, std::vector<int> constrained_vertices);
    ~LbsSolver();
    LbsSolver(LbsSolver &&) noexcept;
    LbsSolver &operator=(LbsSolver &&) noexcept;

    /// `targets` aligns with the constrained vertices given at construction.
    QCMap solve(const BeltramiField &mu, std::span<const Vec2> targets);

    /// Relative residual of the last solve (max over both coordinates).
    double last_residual() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

QCMap solve_lbs(const BeltramiField &mu, const TriMesh &mesh, const BoundaryCondition &bc);

} // namespace qcreg
