#include "qcreg/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/SparseCholesky>

#include "qcreg/errors.hpp"
#include "qcreg/fidelity.hpp"
#include "qcreg/intensity.hpp"
#include "qcreg/metrics.hpp"

namespace qcreg {

void RegistrationConfig::validate() const {
    auto positive = [](double v, const char *name) {
        if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be positive");
    };
    auto non_negative = [](double v, const char *name) {
        if (!(v >= 0.0) || !std::isfinite(v)) throw ConfigError(std::string(name) + " must be non-negative");
    };
    positive(alpha, "alpha");
    positive(rho, "rho");
    non_negative(resolved_beta(), "beta");
    non_negative(resolved_gamma(), "gamma");
    positive(sigma, "sigma");
    positive(base_step, "base_step");
    non_negative(resolved_t1(), "t1");
    non_negative(resolved_t2(), "t2");
    non_negative(resolved_t3(), "t3");
    positive(epsilon, "epsilon");
    positive(max_displacement, "max_displacement");
    positive(refine_step, "refine_step");
    positive(demon_alpha, "demon_alpha");
    if (patches_per_side < 2) throw ConfigError("patches must be at least 2");
    if (sparsify_k < 1) throw ConfigError("sparsify_k must be at least 1");
    if (n_max < 1) throw ConfigError("n_max must be at least 1");
    if (refine_n_max < 0) throw ConfigError("refine_n_max must be non-negative");
    if (demon_steps < 1) throw ConfigError("demon_steps must be at least 1");
    if (max_halvings < 0) throw ConfigError("max_halvings must be non-negative");
    if (levels < 0) throw ConfigError("levels must be non-negative");
    if (!(truncation > 0.0 && truncation < 1.0)) throw ConfigError("truncation must lie in (0, 1)");
    non_negative(smoothing_side, "smoothing_side");
}

struct ElSolver::Impl {
    Eigen::SparseMatrix<double> matrix;
    Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt;
    double rho = 0.0;
};

ElSolver::ElSolver(const SparseSPDSystem &laplacian, double alpha, double rho) : impl_(std::make_unique<Impl>()) {
    if (!(alpha >= 0.0) || !(rho > 0.0)) throw ConfigError("Euler-Lagrange solve needs alpha >= 0 and rho > 0");
    const int n = laplacian.dimension;
    Eigen::SparseMatrix<double> shift(n, n);
    shift.setIdentity();
    impl_->matrix = laplacian.matrix + (2.0 * (alpha + rho)) * shift;
    impl_->rho = rho;
    impl_->ldlt.compute(impl_->matrix);
    if (impl_->ldlt.info() != Eigen::Success) throw SolverError("Euler-Lagrange factorization failed");
}

ElSolver::~ElSolver() = default;
ElSolver::ElSolver(ElSolver &&) noexcept = default;
ElSolver &ElSolver::operator=(ElSolver &&) noexcept = default;

std::vector<Complex> ElSolver::solve(std::span<const Complex> mu_vertex) const {
    const auto n = impl_->matrix.rows();
    if (static_cast<Eigen::Index>(mu_vertex.size()) != n) {
        throw ShapeError("mu has " + std::to_string(mu_vertex.size()) + " vertex values, operator has " +
                         std::to_string(n));
    }
    Eigen::MatrixXd rhs(n, 2);
    for (Eigen::Index v = 0; v < n; ++v) {
        rhs(v, 0) = 2.0 * impl_->rho * mu_vertex[static_cast<std::size_t>(v)].real();
        rhs(v, 1) = 2.0 * impl_->rho * mu_vertex[static_cast<std::size_t>(v)].imag();
    }
    const Eigen::MatrixXd sol = impl_->ldlt.solve(rhs);
    if (impl_->ldlt.info() != Eigen::Success || !sol.allFinite()) throw SolverError("Euler-Lagrange solve failed");
    for (int c = 0; c < 2; ++c) {
        const double scale = rhs.col(c).norm();
        if (scale == 0.0) continue;
        const double r = (impl_->matrix * sol.col(c) - rhs.col(c)).norm() / scale;
        if (!(r <= 1e-8)) throw SolverError("Euler-Lagrange residual " + std::to_string(r) + " exceeds 1e-8");
    }
    std::vector<Complex> nu(static_cast<std::size_t>(n));
    for (Eigen::Index v = 0; v < n; ++v) nu[static_cast<std::size_t>(v)] = {sol(v, 0), sol(v, 1)};
    return nu;
}

std::vector<Complex> solve_el(std::span<const Complex> mu_vertex, const SparseSPDSystem &laplacian, double alpha,
                              double rho) {
    return ElSolver(laplacian, alpha, rho).solve(mu_vertex);
}

BeltramiField descent_to_dmu(const VectorField &df, const QCMap &f, const BeltramiField &mu, const TriMesh &mesh) {
    if (df.size() != mesh.n_vertices() || f.positions.size() != mesh.n_vertices()) {
        throw ShapeError("displacement and map must have one entry per vertex");
    }
    if (mu.size() != mesh.n_faces()) throw ShapeError("mu must have one entry per face");
    std::vector<Vec2> moved(f.positions.size());
    for (std::size_t v = 0; v < moved.size(); ++v) moved[v] = f.positions[v] + df[v];

    BeltramiField dmu;
    dmu.values.resize(mesh.n_faces());
    const auto nf = static_cast<long>(mesh.n_faces());
    long bad_face = nf;
#pragma omp parallel for schedule(static) reduction(min : bad_face)
    for (long fl = 0; fl < nf; ++fl) {
        const auto face = static_cast<std::size_t>(fl);
        const FaceJacobian jd = face_jacobian(mesh, df, face);
        const Complex denom = face_jacobian(mesh, moved, face).dz();
        if (std::abs(denom) < 1e-9) {
            bad_face = std::min(bad_face, fl);
            continue;
        }
        dmu.values[face] = (jd.dzbar() - mu.values[face] * jd.dz()) / denom;
    }
    if (bad_face < nf) {
        throw DegeneratePerturbationError("d_z(f + df) vanishes", static_cast<std::size_t>(bad_face));
    }
    return dmu;
}

BeltramiField update_mu(const BeltramiField &mu, const BeltramiField &dmu_i, const BeltramiField &dmu_w,
                        const BeltramiField &nu, const BeltramiField &mu_f, double t1, double t2, double t3,
                        double bound) {
    const std::size_t n = mu.size();
    if (dmu_i.size() != n || dmu_w.size() != n || nu.size() != n || mu_f.size() != n) {
        throw ShapeError("update_mu needs fields of equal length");
    }
    BeltramiField out;
    out.values.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        const Complex dmu_d = 2.0 * (nu.values[k] - mu_f.values[k]);
        out.values[k] = mu.values[k] + t1 * dmu_i.values[k] + t2 * dmu_w.values[k] + t3 * dmu_d;
    }
    return truncate_mu(out, bound);
}

const char *to_string(Phase phase) noexcept {
    return phase == Phase::Splitting ? "splitting" : "refinement";
}

struct RegistrationProblem::Impl {
    Image moving;
    Image fixed;
    CorrelationMatrix correlation;
    RegistrationConfig config;
    TriMesh mesh;
    SparseSPDSystem laplacian;
    PatchGrid grid;
    BoundaryCondition boundary;
    mutable std::unique_ptr<LbsSolver> lbs;
    std::unique_ptr<ElSolver> el;
};

RegistrationProblem::RegistrationProblem(Image moving, Image fixed, CorrelationMatrix correlation,
                                         RegistrationConfig config)
    : impl_(std::make_unique<Impl>()) {
    config.validate();
    check_intensity_image(moving);
    check_intensity_image(fixed);
    if (moving.height != fixed.height || moving.width != fixed.width) {
        throw ShapeError("moving and static images differ in size");
    }
    auto &p = *impl_;
    p.mesh = build_grid_mesh(fixed.height, fixed.width);
    p.grid = partition_patches(fixed, config.patches_per_side);
    const auto m = static_cast<Eigen::Index>(p.grid.size());
    if (correlation.stage != CorrelationStage::Sparsified) {
        throw StageError("registration needs a sparsified correlation matrix");
    }
    if (correlation.values.rows() != m || correlation.values.cols() != m) {
        throw ShapeError("correlation matrix is " + std::to_string(correlation.values.rows()) + "x" +
                         std::to_string(correlation.values.cols()) + ", patch grid has " + std::to_string(m) +
                         " patches");
    }
    p.moving = std::move(moving);
    p.fixed = std::move(fixed);
    p.correlation = std::move(correlation);
    p.config = config;
    p.laplacian = cotangent_laplacian(p.mesh);
    p.boundary = BoundaryCondition::identity(p.mesh);
    p.lbs = std::make_unique<LbsSolver>(p.mesh, p.boundary.vertices);
    p.el = std::make_unique<ElSolver>(p.laplacian, config.alpha, config.rho);
}

RegistrationProblem::~RegistrationProblem() = default;
RegistrationProblem::RegistrationProblem(RegistrationProblem &&) noexcept = default;
RegistrationProblem &RegistrationProblem::operator=(RegistrationProblem &&) noexcept = default;

const TriMesh &RegistrationProblem::mesh() const noexcept { return impl_->mesh; }
const Image &RegistrationProblem::moving() const noexcept { return impl_->moving; }
const Image &RegistrationProblem::fixed() const noexcept { return impl_->fixed; }
const PatchGrid &RegistrationProblem::grid() const noexcept { return impl_->grid; }
const RegistrationConfig &RegistrationProblem::config() const noexcept { return impl_->config; }
LbsSolver &RegistrationProblem::lbs() const { return *impl_->lbs; }
const ElSolver &RegistrationProblem::el() const { return *impl_->el; }
std::span<const Vec2> RegistrationProblem::boundary_targets() const noexcept { return impl_->boundary.targets; }

EnergyTerms RegistrationProblem::energy(std::span<const Complex> nu, const QCMap &map) const {
    const auto &p = *impl_;
    if (nu.size() != p.mesh.n_vertices()) throw ShapeError("nu must have one value per vertex");
    const BeltramiField mu = compute_mu(map, p.mesh);
    const std::vector<Complex> mu_v = face_to_vertex(mu.values, p.mesh);

    Eigen::VectorXd re(static_cast<Eigen::Index>(nu.size())), im(static_cast<Eigen::Index>(nu.size()));
    EnergyTerms e;
    double sq = 0.0, coupling = 0.0;
    for (std::size_t v = 0; v < nu.size(); ++v) {
        re(static_cast<Eigen::Index>(v)) = nu[v].real();
        im(static_cast<Eigen::Index>(v)) = nu[v].imag();
        sq += std::norm(nu[v]);
        coupling += std::norm(nu[v] - mu_v[v]);
    }
    e.dirichlet = 0.5 * (re.dot(p.laplacian.matrix * re) + im.dot(p.laplacian.matrix * im));
    e.alpha_nu = p.config.alpha * sq;
    e.coupling = p.config.rho * coupling;
    e.intensity = p.config.resolved_beta() * intensity_energy(p.moving, p.fixed, map);
    const double gamma = p.config.resolved_gamma();
    if (gamma > 0.0) {
        e.fidelity = gamma * fidelity_energy(p.correlation,
                                             make_correspondence_state(p.grid, map, p.mesh, p.config.sigma));
    }
    e.total = e.dirichlet + e.alpha_nu + e.coupling + e.intensity + e.fidelity;
    return e;
}

namespace {

void zero_boundary(VectorField &field, const TriMesh &mesh) {
    for (std::size_t v = 0; v < field.size(); ++v) {
        if (mesh.boundary[v]) field[v] = {};
    }
}

double max_length(const VectorField &field) {
    double m = 0.0;
    for (const Vec2 &d : field) m = std::max(m, norm(d));
    return m;
}

VectorField scaled(const VectorField &field, double s) {
    VectorField out(field.size());
    for (std::size_t v = 0; v < field.size(); ++v) out[v] = s * field[v];
    return out;
}

double sup_distance(std::span<const Complex> a, std::span<const Complex> b) {
    double d = 0.0;
    for (std::size_t k = 0; k < a.size(); ++k) d = std::max(d, std::abs(a[k] - b[k]));
    return d;
}

double sup_norm(std::span<const Complex> a) {
    double d = 0.0;
    for (const Complex &z : a) d = std::max(d, std::abs(z));
    return d;
}

// Reconstructs a map, or returns nothing when the result is not flip-free.
std::optional<QCMap> reconstruct(const RegistrationProblem &problem, const BeltramiField &mu) {
    QCMap map = problem.lbs().solve(mu, problem.boundary_targets());
    if (count_flipped_faces(map, problem.mesh()) != 0) return std::nullopt;
    return map;
}

// Similarity used by the refinement line search. Falls back to the sum of
// squared differences when one of the E_sim normalizers vanishes.
double similarity(const RegistrationProblem &problem, const QCMap &map) {
    const Image warped = warp_image(map, problem.fixed());
    try {
        return e_sim_warped(problem.moving(), warped);
    } catch (const DegenerateImageError &) {
        double s = 0.0;
        for (std::size_t k = 0; k < warped.size(); ++k) {
            const double d = problem.moving().pixels[k] - warped.pixels[k];
            s += d * d;
        }
        return s;
    }
}

} // namespace

VectorField RegistrationProblem::splitting_direction(const QCMap &map) const {
    const auto &p = *impl_;
    const double t1 = p.config.resolved_t1(), t2 = p.config.resolved_t2();
    VectorField dir(p.mesh.n_vertices());
    if (t1 > 0.0) {
        const VectorField di = intensity_descent(p.moving, p.fixed, map);
        for (std::size_t v = 0; v < dir.size(); ++v) dir[v] += t1 * di[v];
    }
    if (t2 > 0.0) {
        const auto state = make_correspondence_state(p.grid, map, p.mesh, p.config.sigma);
        const VectorField dw = rasterize_descent(fidelity_spring_direction(p.correlation, state), p.grid, p.mesh);
        for (std::size_t v = 0; v < dir.size(); ++v) dir[v] += t2 * dw[v];
    }
    const double side = p.config.smoothing_side > 0.0 ? p.config.smoothing_side : std::max(p.mesh.height, p.mesh.width);
    VectorField smooth = gaussian_smooth_field(dir, p.mesh.height + 1, p.mesh.width + 1, side);
    zero_boundary(smooth, p.mesh);
    return smooth;
}

RegistrationState register_images(const RegistrationProblem &problem, const std::optional<QCMap> &initial,
                                  int level) {
    const auto &cfg = problem.config();
    const auto &mesh = problem.mesh();
    RegistrationState state;
    state.map = initial ? *initial : identity_map(mesh);
    if (state.map.positions.size() != mesh.n_vertices()) throw ShapeError("initial map does not match the images");
    state.mu = compute_mu(state.map, mesh);
    state.nu = face_to_vertex(state.mu.values, mesh);

    EnergyTerms current = problem.energy(state.nu, state.map);
    state.trace.push_back({level, Phase::Splitting, 0, current, similarity(problem, state.map), sup_norm(state.nu), 0.0});

    const double t3 = cfg.resolved_t3();
    for (int n = 1; n <= cfg.n_max; ++n) {
        try {
            // Exact minimization over nu with f fixed.
            const std::vector<Complex> nu_next = problem.el().solve(face_to_vertex(state.mu.values, mesh));
            BeltramiField nu_face{vertex_to_face(nu_next, mesh)};

            QCMap base = state.map;
            BeltramiField mu_base = state.mu;
            EnergyTerms e_base = problem.energy(nu_next, base);
            if (auto g = reconstruct(problem, truncate_mu(nu_face, cfg.truncation))) {
                const EnergyTerms e_g = problem.energy(nu_next, *g);
                if (e_g.total < e_base.total) {
                    base = std::move(*g);
                    mu_base = compute_mu(base, mesh);
                    e_base = e_g;
                }
            }

            // Gradient step on mu(f), backtracked on the splitting energy.
            const VectorField dir = problem.splitting_direction(base);
            const double longest = max_length(dir);
            const double cap = longest > cfg.max_displacement ? cfg.max_displacement / longest : 1.0;
            double s = 1.0;
            double accepted = 0.0;
            for (int h = 0; h <= cfg.max_halvings; ++h, s *= 0.5) {
                BeltramiField dmu;
                try {
                    dmu = descent_to_dmu(scaled(dir, s * cap), base, mu_base, mesh);
                } catch (const DegeneratePerturbationError &) {
                    if (h == cfg.max_halvings) throw;
                    continue;
                }
                BeltramiField candidate_mu;
                candidate_mu.values.resize(mu_base.size());
                for (std::size_t k = 0; k < mu_base.size(); ++k) {
                    candidate_mu.values[k] =
                        mu_base.values[k] + dmu.values[k] + s * t3 * 2.0 * (nu_face.values[k] - mu_base.values[k]);
                }
                auto candidate = reconstruct(problem, truncate_mu(candidate_mu, cfg.truncation));
                if (!candidate) continue;
                const EnergyTerms e_c = problem.energy(nu_next, *candidate);
                if (e_c.total <= e_base.total) {
                    base = std::move(*candidate);
                    mu_base = compute_mu(base, mesh);
                    e_base = e_c;
                    accepted = s;
                    break;
                }
            }

            // Both halves of the splitting must be stationary; at an identity start
            // nu alone does not move during the first iteration.
            const double change = std::max(sup_distance(nu_next, state.nu), sup_distance(mu_base.values, state.mu.values));
            state.map = std::move(base);
            state.mu = std::move(mu_base);
            state.nu = nu_next;
            current = e_base;
            state.iterations = n;
            state.trace.push_back({level, Phase::Splitting, n, current, similarity(problem, state.map),
                                   sup_norm(state.nu), accepted});
            if (change <= cfg.epsilon) {
                state.converged = true;
                break;
            }
        } catch (const RegistrationError &) {
            throw;
        } catch (const Error &e) {
            throw RegistrationError("splitting", n, e.what());
        }
    }
    return state;
}

RegistrationState refine_intensity(const RegistrationProblem &problem, RegistrationState state, int level) {
    const auto &cfg = problem.config();
    const auto &mesh = problem.mesh();
    state.mu = compute_mu(state.map, mesh);
    state.converged = false;
    double current = similarity(problem, state.map);
    BeltramiField nu = state.mu;
    state.trace.push_back({level, Phase::Refinement, 0, {}, current, nu.sup_norm(), 0.0});

    for (int n = 1; n <= cfg.refine_n_max; ++n) {
        try {
            VectorField df = demons_refine_step(problem.moving(), problem.fixed(), state.map, cfg.demon_alpha,
                                                cfg.demon_steps, cfg.smoothing_side);
            zero_boundary(df, mesh);
            BeltramiField dnu;
            for (int h = 0;; ++h) {
                try {
                    dnu = descent_to_dmu(df, state.map, nu, mesh);
                    break;
                } catch (const DegeneratePerturbationError &) {
                    if (h == cfg.max_halvings) throw;
                    df = scaled(df, 0.5);
                }
            }

            double t = cfg.refine_step;
            std::optional<QCMap> accepted;
            BeltramiField nu_next;
            double e_next = current;
            for (int h = 0; h <= cfg.max_halvings; ++h, t *= 0.5) {
                BeltramiField trial;
                trial.values.resize(nu.size());
                for (std::size_t k = 0; k < nu.size(); ++k) trial.values[k] = nu.values[k] + t * dnu.values[k];
                trial = truncate_mu(trial, cfg.truncation);
                auto candidate = reconstruct(problem, trial);
                if (!candidate) continue;
                const double e = similarity(problem, *candidate);
                if (e <= current) {
                    accepted = std::move(candidate);
                    nu_next = std::move(trial);
                    e_next = e;
                    break;
                }
            }
            state.iterations = n;
            if (!accepted) {
                state.trace.push_back({level, Phase::Refinement, n, {}, current, nu.sup_norm(), 0.0});
                state.converged = true;
                break;
            }
            const double change = sup_distance(nu_next.values, nu.values);
            state.map = std::move(*accepted);
            state.mu = compute_mu(state.map, mesh);
            current = e_next;
            state.trace.push_back({level, Phase::Refinement, n, {}, current, nu_next.sup_norm(), t});
            nu = state.mu;
            if (change <= cfg.epsilon) {
                state.converged = true;
                break;
            }
        } catch (const RegistrationError &) {
            throw;
        } catch (const Error &e) {
            throw RegistrationError("refinement", n, e.what());
        }
    }
    return state;
}

} // namespace qcreg
