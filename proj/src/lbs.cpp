#include "qcreg/lbs.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <set>
#include <string>

#include <Eigen/SparseCholesky>

#include "qcreg/errors.hpp"

namespace qcreg {

LbsCoefficients lbs_coefficients(const BeltramiField &mu) {
    const std::size_t n = mu.size();
    LbsCoefficients c;
    c.alpha1.resize(n);
    c.alpha2.resize(n);
    c.alpha3.resize(n);
    for (std::size_t f = 0; f < n; ++f) {
        const double rho = mu.values[f].real();
        const double tau = mu.values[f].imag();
        if (!(std::abs(mu.values[f]) < 1.0 - 1e-9)) {
            throw NearSingularError("|mu| too close to 1 for the Beltrami solver", f);
        }
        const double denom = 1.0 - rho * rho - tau * tau;
        c.alpha1[f] = ((rho - 1.0) * (rho - 1.0) + tau * tau) / denom;
        c.alpha2[f] = -2.0 * tau / denom;
        c.alpha3[f] = (1.0 + 2.0 * rho + rho * rho + tau * tau) / denom;
    }
    return c;
}

BoundaryCondition BoundaryCondition::identity(const TriMesh &mesh) {
    return from_positions(mesh, mesh.positions);
}

BoundaryCondition BoundaryCondition::from_positions(const TriMesh &mesh, std::span<const Vec2> positions) {
    BoundaryCondition bc;
    for (std::size_t v = 0; v < mesh.n_vertices(); ++v) {
        if (mesh.boundary[v]) {
            bc.vertices.push_back(static_cast<int>(v));
            bc.targets.push_back(positions[v]);
        }
    }
    return bc;
}

void validate(const BoundaryCondition &bc, const TriMesh &mesh) {
    if (bc.vertices.size() != bc.targets.size()) {
        throw ShapeError("boundary condition has " + std::to_string(bc.vertices.size()) + " vertices but " +
                         std::to_string(bc.targets.size()) + " targets");
    }
    std::set<int> seen;
    for (int v : bc.vertices) {
        if (v < 0 || static_cast<std::size_t>(v) >= mesh.n_vertices()) {
            throw InvalidDimensionError("constrained vertex " + std::to_string(v) + " is outside the mesh");
        }
        if (!seen.insert(v).second) {
            throw InvalidDimensionError("constrained vertex " + std::to_string(v) + " listed twice");
        }
    }
    // Need three targets spanning a triangle.
    const auto &t = bc.targets;
    for (std::size_t a = 0; a < t.size(); ++a) {
        for (std::size_t b = a + 1; b < t.size(); ++b) {
            const Vec2 ab = t[b] - t[a];
            if (norm(ab) < 1e-12) continue;
            for (std::size_t c = b + 1; c < t.size(); ++c) {
                if (std::abs(cross(ab, t[c] - t[a])) > 1e-9 * (1.0 + dot(ab, ab))) return;
            }
            break;
        }
    }
    throw InvalidDimensionError("boundary condition needs at least 3 non-collinear targets");
}

struct LbsSolver::Impl {
    const TriMesh *mesh = nullptr;
    std::vector<int> constrained;
    std::vector<int> free_index; // -1 for constrained vertices
    int n_free = 0;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    bool analysed = false;
    double residual = 0.0;
};

LbsSolver::LbsSolver(const TriMesh &mesh, std::vector<int> constrained_vertices) : impl_(std::make_unique<Impl>()) {
    impl_->mesh = &mesh;
    impl_->constrained = std::move(constrained_vertices);
    impl_->free_index.assign(mesh.n_vertices(), 0);
    for (int v : impl_->constrained) impl_->free_index[static_cast<std::size_t>(v)] = -1;
    int next = 0;
    for (auto &idx : impl_->free_index) {
        if (idx == 0) idx = next++;
    }
    impl_->n_free = next;
}

LbsSolver::~LbsSolver() = default;
LbsSolver::LbsSolver(LbsSolver &&) noexcept = default;
LbsSolver &LbsSolver::operator=(LbsSolver &&) noexcept = default;

double LbsSolver::last_residual() const noexcept { return impl_->residual; }

QCMap LbsSolver::solve(const BeltramiField &mu, std::span<const Vec2> targets) {
    const TriMesh &mesh = *impl_->mesh;
    if (mu.size() != mesh.n_faces()) {
        throw ShapeError("mu has " + std::to_string(mu.size()) + " values, mesh has " +
                         std::to_string(mesh.n_faces()) + " faces");
    }
    if (targets.size() != impl_->constrained.size()) {
        throw ShapeError("expected " + std::to_string(impl_->constrained.size()) + " targets, got " +
                         std::to_string(targets.size()));
    }
    const LbsCoefficients coef = lbs_coefficients(mu);

    // Local P1 stiffness |T| grad(phi_a)^T A grad(phi_b), one 3x3 block per face.
    const auto nf = static_cast<long>(mesh.n_faces());
    std::vector<std::array<double, 9>> local(mesh.n_faces());
#pragma omp parallel for schedule(static)
    for (long fl = 0; fl < nf; ++fl) {
        const auto f = static_cast<std::size_t>(fl);
        const auto &tri = mesh.faces[f];
        const Vec2 p0 = mesh.positions[tri[0]], p1 = mesh.positions[tri[1]], p2 = mesh.positions[tri[2]];
        const double twice_area = cross(p1 - p0, p2 - p0);
        const Vec2 g[3] = {
            Vec2{p1.y - p2.y, p2.x - p1.x} * (1.0 / twice_area),
            Vec2{p2.y - p0.y, p0.x - p2.x} * (1.0 / twice_area),
            Vec2{p0.y - p1.y, p1.x - p0.x} * (1.0 / twice_area),
        };
        const double a1 = coef.alpha1[f], a2 = coef.alpha2[f], a3 = coef.alpha3[f];
        const double area = 0.5 * twice_area;
        for (int a = 0; a < 3; ++a) {
            const Vec2 Ag{a1 * g[a].x + a2 * g[a].y, a2 * g[a].x + a3 * g[a].y};
            for (int b = 0; b < 3; ++b) local[f][static_cast<std::size_t>(3 * a + b)] = area * dot(Ag, g[b]);
        }
    }

    std::vector<Vec2> pinned(mesh.n_vertices());
    for (std::size_t k = 0; k < impl_->constrained.size(); ++k) {
        pinned[static_cast<std::size_t>(impl_->constrained[k])] = targets[k];
    }

    const int n = impl_->n_free;
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(mesh.n_faces() * 9);
    Eigen::MatrixXd rhs = Eigen::MatrixXd::Zero(n, 2);
    for (std::size_t f = 0; f < mesh.n_faces(); ++f) {
        const auto &tri = mesh.faces[f];
        for (int a = 0; a < 3; ++a) {
            const int ra = impl_->free_index[static_cast<std::size_t>(tri[a])];
            if (ra < 0) continue;
            for (int b = 0; b < 3; ++b) {
                const double k = local[f][static_cast<std::size_t>(3 * a + b)];
                const int cb = impl_->free_index[static_cast<std::size_t>(tri[b])];
                if (cb >= 0) {
                    triplets.emplace_back(ra, cb, k);
                } else {
                    const Vec2 t = pinned[static_cast<std::size_t>(tri[b])];
                    rhs(ra, 0) -= k * t.x;
                    rhs(ra, 1) -= k * t.y;
                }
            }
        }
    }

    QCMap out{mesh.height, mesh.width, pinned};
    if (n > 0) {
        Eigen::SparseMatrix<double> K(n, n);
        K.setFromTriplets(triplets.begin(), triplets.end());
        if (!impl_->analysed) {
            impl_->ldlt.analyzePattern(K);
            impl_->analysed = true;
        }
        impl_->ldlt.factorize(K);
        if (impl_->ldlt.info() != Eigen::Success) {
            throw SolverError("Beltrami system factorization failed");
        }
        const Eigen::MatrixXd sol = impl_->ldlt.solve(rhs);
        if (impl_->ldlt.info() != Eigen::Success || !sol.allFinite()) {
            throw SolverError("Beltrami system solve failed");
        }
        double worst = 0.0;
        for (int c = 0; c < 2; ++c) {
            const double r = (K * sol.col(c) - rhs.col(c)).norm();
            const double scale = std::max(rhs.col(c).norm(), 1e-300);
            worst = std::max(worst, r / scale);
        }
        impl_->residual = worst;
        if (!(worst <= 1e-8)) {
            throw SolverError("Beltrami system residual " + std::to_string(worst) + " exceeds 1e-8");
        }
        for (std::size_t v = 0; v < mesh.n_vertices(); ++v) {
            const int r = impl_->free_index[v];
            if (r >= 0) out.positions[v] = {sol(r, 0), sol(r, 1)};
        }
    }
    return out;
}

QCMap solve_lbs(const BeltramiField &mu, const TriMesh &mesh, const BoundaryCondition &bc) {
    validate(bc, mesh);
    LbsSolver solver(mesh, bc.vertices);
    return solver.solve(mu, bc.targets);
}

} // namespace qcreg
