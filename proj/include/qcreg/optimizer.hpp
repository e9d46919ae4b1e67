#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "qcreg/beltrami.hpp"
#include "qcreg/features.hpp"
#include "qcreg/image.hpp"
#include "qcreg/lbs.hpp"
#include "qcreg/mesh.hpp"

namespace qcreg {

struct RegistrationConfig {
    // Energy weights. beta and gamma default to 25 rho and 5 rho when unset.
    double alpha = 5.0;
    double rho = 50.0;
    std::optional<double> beta;
    std::optional<double> gamma;

    double sigma = 1.0; // in patch-centre spacings
    int patches_per_side = 10;
    int sparsify_k = 20;
    Descriptor descriptor = Descriptor::GradientHistogram;

    // Step sizes t1, t2, t3 default to base_step * weight / rho.
    double base_step = 0.1;
    std::optional<double> t1, t2, t3;
    int max_halvings = 8;
    // Largest vertex displacement (pixels) one splitting step may request.
    double max_displacement = 2.0;

    double epsilon = 1e-3;
    int n_max = 100;

    int refine_n_max = 100;
    double refine_step = 1.0;
    int demon_steps = 3;
    double demon_alpha = 1.0;

    int levels = 2;
    double truncation = 0.95;
    // Side length fed to gaussian_smooth_field; 0 uses the current image.
    // register_multires sets it to the finest side so every level smooths
    // with the same width in its own pixels.
    double smoothing_side = 0.0;

    double resolved_beta() const noexcept { return beta.value_or(25.0 * rho); }
    double resolved_gamma() const noexcept { return gamma.value_or(5.0 * rho); }
    double resolved_t1() const noexcept { return t1.value_or(base_step * resolved_beta() / rho); }
    double resolved_t2() const noexcept { return t2.value_or(base_step * resolved_gamma() / rho); }
    double resolved_t3() const noexcept { return t3.value_or(base_step); }

    /// Throws ConfigError on out-of-range values.
    void validate() const;
};

/// (-Delta + 2 alpha + 2 rho) nu = 2 rho mu_v, real and imaginary parts
/// solved with one factorization.
class ElSolver {
public:
    ElSolver(const SparseSPDSystem &laplacian, double alpha, double rho);
    ~ElSolver();
    ElSolver(ElSolver &&) noexcept;
    ElSolver &operator=(ElSolver &&) noexcept;

    std::vector<Complex> solve(std::span<const Complex> mu_vertex) const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

std::vector<Complex> solve_el(std::span<const Complex> mu_vertex, const SparseSPDSystem &laplacian, double alpha,
                              double rho);

/// Per-face (d_zbar(df) - mu d_z(df)) / d_z(f + df), which equals
/// mu(f + df) - mu(f). Throws DegeneratePerturbationError when |d_z(f + df)| < 1e-9.
BeltramiField descent_to_dmu(const VectorField &df, const QCMap &f, const BeltramiField &mu, const TriMesh &mesh);

/// truncate(mu + t1 dmu_I + t2 dmu_W + t3 dmu_D) with dmu_D = 2 (nu - mu_f).
/// `nu` and `mu_f` are per face.
BeltramiField update_mu(const BeltramiField &mu, const BeltramiField &dmu_i, const BeltramiField &dmu_w,
                        const BeltramiField &nu, const BeltramiField &mu_f, double t1, double t2, double t3,
                        double bound);

/// Terms of the splitting energy for one state (nu per vertex, f per vertex):
///   dirichlet = 1/2 nu^T (-Delta) nu, alpha_nu = alpha sum |nu|^2,
///   coupling  = rho sum |nu - face_to_vertex(mu(f))|^2,
///   intensity = beta sum_p (I_M - I_S(f))^2, fidelity = gamma sum C^2 (D - 1)^2.
struct EnergyTerms {
    double dirichlet = 0.0;
    double alpha_nu = 0.0;
    double coupling = 0.0;
    double intensity = 0.0;
    double fidelity = 0.0;
    double total = 0.0;
};

enum class Phase { Splitting, Refinement };
const char *to_string(Phase phase) noexcept;

struct TraceRecord {
    int level = 0;
    Phase phase = Phase::Splitting;
    int iteration = 0;
    EnergyTerms energy;
    double e_sim = 0.0;
    double nu_sup = 0.0;
    double step = 0.0; // accepted step scale, 0 when the step was rejected
};

struct RegistrationState {
    QCMap map;
    std::vector<Complex> nu;  // per vertex in the splitting phase
    BeltramiField mu;         // mu(map)
    int iterations = 0;
    bool converged = false;
    std::vector<TraceRecord> trace;
};

/// Everything an optimizer run needs that does not change between iterations.
class RegistrationProblem {
public:
    /// `correlation` must be sparsified and sized for config.patches_per_side.
    RegistrationProblem(Image moving, Image fixed, CorrelationMatrix correlation, RegistrationConfig config);
    ~RegistrationProblem();
    RegistrationProblem(RegistrationProblem &&) noexcept;
    RegistrationProblem &operator=(RegistrationProblem &&) noexcept;

    const TriMesh &mesh() const noexcept;
    const Image &moving() const noexcept;
    const Image &fixed() const noexcept;
    const PatchGrid &grid() const noexcept;
    const RegistrationConfig &config() const noexcept;

    EnergyTerms energy(std::span<const Complex> nu_vertex, const QCMap &map) const;

    /// Map-space descent for the splitting phase: t1 df_I + t2 df_W, smoothed,
    /// zero on the boundary.
    VectorField splitting_direction(const QCMap &map) const;

    LbsSolver &lbs() const;
    const ElSolver &el() const;
    std::span<const Vec2> boundary_targets() const noexcept;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Penalty-splitting loop from `initial` (identity when empty).
RegistrationState register_images(const RegistrationProblem &problem, const std::optional<QCMap> &initial = {},
                                  int level = 0);

/// Demons refinement on top of a splitting result; E_sim never increases.
RegistrationState refine_intensity(const RegistrationProblem &problem, RegistrationState state, int level = 0);

struct MultiresResult {
    RegistrationState state;
    std::vector<TraceRecord> trace; // all levels, coarsest first
};

/// Coarse-to-fine driver: 2x box pyramid with `config.levels` extra levels.
/// The correlation matrix is shared by all levels (patch indices do not depend
/// on resolution). Sides must be divisible by 2^levels.
MultiresResult register_multires(const Image &moving, const Image &fixed, const CorrelationMatrix &correlation,
                                 const RegistrationConfig &config);

/// f_fine(x) = 2 f_coarse(x / 2) on the 2h x 2w mesh. Exact refinement of the
/// piecewise-linear map, so orientation is preserved.
QCMap upsample_map(const QCMap &coarse);

} // namespace qcreg
