// Euler-Lagrange solve, Beltrami updates and the registration loops.

#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "qcreg/errors.hpp"
#include "qcreg/metrics.hpp"
#include "qcreg/optimizer.hpp"
#include "qcreg/synthetic.hpp"

using namespace qcreg;

namespace {

CorrelationMatrix correlation_for(const Image &moving, const Image &fixed, const RegistrationConfig &cfg) {
    const PatchGrid grid = partition_patches(moving, cfg.patches_per_side);
    return build_correlation(extract_features_builtin(moving, grid, cfg.descriptor),
                             extract_features_builtin(fixed, grid, cfg.descriptor), cfg.sparsify_k);
}

CorrelationMatrix diagonal(int m) { return {CorrelationStage::Sparsified, Eigen::MatrixXd::Identity(m, m)}; }

double map_distance(const QCMap &a, const QCMap &b) {
    double d = 0.0;
    for (std::size_t v = 0; v < a.positions.size(); ++v) d = std::max(d, norm(a.positions[v] - b.positions[v]));
    return d;
}

void check_trace_contracts(const std::vector<TraceRecord> &trace) {
    for (std::size_t k = 0; k < trace.size(); ++k) {
        CHECK(trace[k].nu_sup < 1.0);
        if (k == 0 || trace[k].level != trace[k - 1].level || trace[k].phase != trace[k - 1].phase) continue;
        if (trace[k].phase == Phase::Splitting) CHECK(trace[k].energy.total <= trace[k - 1].energy.total + 1e-6);
        else CHECK(trace[k].e_sim <= trace[k - 1].e_sim + 1e-9);
    }
}

} // namespace

TEST_CASE("solve_el") {
    const TriMesh mesh = build_grid_mesh(16, 20);
    const auto lap = cotangent_laplacian(mesh);
    for (const Complex &v : solve_el(std::vector<Complex>(mesh.n_vertices(), 0.0), lap, 5.0, 50.0)) CHECK(v == 0.0);

    const Complex c(0.3, -0.45);
    for (const Complex &v : solve_el(std::vector<Complex>(mesh.n_vertices(), c), lap, 5.0, 50.0)) {
        CHECK(std::abs(v - (50.0 / 55.0) * c) <= 1e-8);
    }

    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> r(0.0, 0.8), a(-3.2, 3.2);
    std::vector<Complex> mu(mesh.n_vertices());
    double sup = 0.0;
    for (auto &m : mu) {
        m = std::polar(r(rng), a(rng));
        sup = std::max(sup, std::abs(m));
    }
    const auto nu = solve_el(mu, lap, 5.0, 50.0);
    for (const Complex &v : nu) {
        CHECK(std::abs(v.real()) <= sup * 50.0 / 55.0 + 1e-12);
        CHECK(std::abs(v.imag()) <= sup * 50.0 / 55.0 + 1e-12);
    }
    // Residual of the normal equations.
    Eigen::VectorXd re(lap.dimension), im(lap.dimension);
    for (int k = 0; k < lap.dimension; ++k) {
        re[k] = nu[static_cast<std::size_t>(k)].real();
        im[k] = nu[static_cast<std::size_t>(k)].imag();
    }
    const Eigen::VectorXd rr = lap.matrix * re + 110.0 * re;
    for (int k = 0; k < lap.dimension; ++k) CHECK(rr[k] == doctest::Approx(100.0 * mu[static_cast<std::size_t>(k)].real()).epsilon(1e-8));
    CHECK_THROWS_AS(solve_el(std::vector<Complex>(3), lap, 5.0, 50.0), ShapeError);
}

TEST_CASE("descent_to_dmu") {
    const TriMesh mesh = build_grid_mesh(10, 10);
    const QCMap id = identity_map(mesh);
    const BeltramiField zero{std::vector<Complex>(mesh.n_faces(), 0.0)};
    for (const Complex &d : descent_to_dmu(VectorField(mesh.n_vertices()), id, zero, mesh).values) CHECK(d == 0.0);

    const double eps = 0.05;
    VectorField conj(mesh.n_vertices());
    for (std::size_t v = 0; v < conj.size(); ++v) conj[v] = {eps * mesh.positions[v].x, -eps * mesh.positions[v].y};
    for (const Complex &d : descent_to_dmu(conj, id, zero, mesh).values) CHECK(std::abs(d - eps) < 1e-14);

    // Exact finite difference of mu, and second-order agreement with the linearization.
    const auto f = oracle::random_smooth_map(8, 10.0, 0.3);
    QCMap map = id;
    for (auto &p : map.positions) p = f(p);
    const auto mu = compute_mu(map, mesh);
    VectorField df(mesh.n_vertices());
    for (std::size_t v = 0; v < df.size(); ++v) {
        const Vec2 p = mesh.positions[v];
        df[v] = {std::sin(0.7 * p.x + 0.2 * p.y), std::cos(0.3 * p.x - 0.5 * p.y)};
    }
    auto lin_error = [&](double s) {
        VectorField d = df;
        for (auto &x : d) x *= s;
        QCMap moved = map;
        for (std::size_t v = 0; v < d.size(); ++v) moved.positions[v] += d[v];
        const auto exact = compute_mu(moved, mesh);
        const auto dmu = descent_to_dmu(d, map, mu, mesh);
        double finite = 0.0, lin = 0.0;
        for (std::size_t k = 0; k < mu.size(); ++k) {
            finite = std::max(finite, std::abs(exact.values[k] - mu.values[k] - dmu.values[k]));
            // First-order Wirtinger form: denominator d_z(f) instead of d_z(f + df).
            const auto j = face_jacobian(mesh, d, k);
            const auto jf = face_jacobian(mesh, map.positions, k);
            const Complex linear = (j.dzbar() - mu.values[k] * j.dz()) / jf.dz();
            lin = std::max(lin, std::abs(exact.values[k] - mu.values[k] - linear));
        }
        CHECK(finite < 1e-12);
        return lin;
    };
    const double e1 = lin_error(1e-2), e2 = lin_error(5e-3);
    CHECK(e2 < e1);
    CHECK(e1 / e2 == doctest::Approx(4.0).epsilon(0.1));

    // Collapse: df = -f on every vertex.
    VectorField collapse(mesh.n_vertices());
    for (std::size_t v = 0; v < collapse.size(); ++v) collapse[v] = -1.0 * id.positions[v];
    CHECK_THROWS_AS(descent_to_dmu(collapse, id, zero, mesh), DegeneratePerturbationError);
}

TEST_CASE("update_mu") {
    const BeltramiField mu{{0.2, Complex(0.1, 0.3)}}, z{{0.0, 0.0}};
    const auto same = update_mu(mu, z, z, mu, mu, 0.1, 0.1, 0.1, 0.95);
    CHECK(same.values == mu.values);

    // Coupling descent pulls mu towards nu.
    const auto step = update_mu(BeltramiField{{0.0}}, BeltramiField{{0.0}}, BeltramiField{{0.0}}, BeltramiField{{0.5}},
                                BeltramiField{{0.0}}, 0.1, 0.1, 0.1, 0.95);
    CHECK(std::abs(step.values[0] - 0.1) < 1e-15);

    const auto combined = update_mu(BeltramiField{{0.5}}, BeltramiField{{Complex(0, 2)}}, BeltramiField{{1.0}},
                                    BeltramiField{{0.5}}, BeltramiField{{0.5}}, 0.5, 0.5, 0.1, 0.95);
    CHECK(std::abs(combined.values[0]) == doctest::Approx(0.95));
    CHECK(std::arg(combined.values[0]) == doctest::Approx(std::arg(Complex(1.0, 1.0))));
}

TEST_CASE("config validation") {
    RegistrationConfig cfg;
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.resolved_beta() == 1250.0);
    CHECK(cfg.resolved_gamma() == 250.0);
    CHECK(cfg.resolved_t1() == doctest::Approx(2.5));
    CHECK(cfg.resolved_t2() == doctest::Approx(0.5));
    CHECK(cfg.resolved_t3() == doctest::Approx(0.1));
    cfg.rho = 0.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.truncation = 1.0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
    cfg = {};
    cfg.n_max = 0;
    CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("problem construction validates inputs") {
    RegistrationConfig cfg;
    cfg.patches_per_side = 4;
    const Image a = smooth_pattern(32, 32);
    CHECK_THROWS_AS(RegistrationProblem(a, smooth_pattern(32, 30), diagonal(16), cfg), ShapeError);
    CHECK_THROWS_AS(RegistrationProblem(a, a, diagonal(9), cfg), ShapeError);
    CHECK_THROWS_AS(RegistrationProblem(a, a, CorrelationMatrix{CorrelationStage::Raw, Eigen::MatrixXd::Identity(16, 16)}, cfg),
                    StageError);
    Image bad = a;
    bad.pixels[3] = 1.5;
    CHECK_THROWS_AS(RegistrationProblem(bad, a, diagonal(16), cfg), InvalidDimensionError);
}

TEST_CASE("self-registration stays at the identity") {
    RegistrationConfig cfg;
    cfg.patches_per_side = 4;
    const Image img = smooth_pattern(32, 32, 0.3);
    const RegistrationProblem problem(img, img, diagonal(16), cfg);
    const auto state = register_images(problem);
    CHECK(map_distance(state.map, identity_map(problem.mesh())) <= 1e-3);
    for (const auto &r : state.trace) CHECK(std::abs(r.energy.total - state.trace.front().energy.total) <= 1e-6);

    const auto refined = refine_intensity(problem, state);
    CHECK(map_distance(refined.map, state.map) <= 1e-6);
}

TEST_CASE("pure smoothing relaxes towards the identity") {
    RegistrationConfig cfg;
    cfg.patches_per_side = 4;
    cfg.beta = 0.0;
    cfg.gamma = 0.0;
    cfg.n_max = 60;
    cfg.epsilon = 1e-6;
    const Image img = smooth_pattern(24, 24, 0.1);
    const RegistrationProblem problem(img, smooth_pattern(24, 24, 0.7), diagonal(16), cfg);
    const auto f = oracle::random_smooth_map(4, 24.0, 0.4);
    QCMap start = identity_map(problem.mesh());
    for (auto &p : start.positions) p = f(p);
    const double initial_distance = map_distance(start, identity_map(problem.mesh()));
    const auto state = register_images(problem, start);
    check_trace_contracts(state.trace);
    const double initial_nu = state.trace[1].nu_sup;
    CHECK(state.trace.back().nu_sup < 0.1 * initial_nu);
    CHECK(map_distance(state.map, identity_map(problem.mesh())) < 0.1 * initial_distance);
}

TEST_CASE("registration of a small translated blob") {
    RegistrationConfig cfg;
    cfg.patches_per_side = 8;
    cfg.levels = 0;
    const ImagePair pair = translated_blob(64, 12.0);
    const auto c = correlation_for(pair.moving, pair.fixed, cfg);
    const RegistrationProblem problem(pair.moving, pair.fixed, c, cfg);
    auto state = register_images(problem);
    check_trace_contracts(state.trace);
    CHECK(count_flips(state.map) == 0);
    CHECK(state.trace.back().energy.total < state.trace.front().energy.total);
    const double before = state.trace.back().e_sim;
    state = refine_intensity(problem, std::move(state));
    check_trace_contracts(state.trace);
    CHECK(count_flips(state.map) == 0);
    CHECK(state.trace.back().e_sim <= before + 1e-9);
    CHECK(e_sim(pair.moving, pair.fixed, state.map) < 0.5 * e_sim(pair.moving, pair.fixed, identity_map(problem.mesh())));
    for (const Complex &m : state.mu.values) CHECK(std::abs(m) < 1.0);
}

TEST_CASE("upsample_map") {
    const TriMesh coarse = build_grid_mesh(6, 8);
    CHECK(upsample_map(identity_map(coarse)).positions == identity_map(build_grid_mesh(12, 16)).positions);

    const auto f = oracle::random_smooth_map(13, 6.0, 0.5);
    QCMap map = identity_map(coarse);
    for (auto &p : map.positions) p = f(p);
    const QCMap fine = upsample_map(map);
    CHECK(fine.height == 12);
    CHECK(fine.width == 16);
    CHECK(count_flips(fine) == 0);
    const TriMesh fine_mesh = build_grid_mesh(12, 16);
    for (double x = 0.0; x <= 8.0; x += 0.3) {
        for (double y = 0.0; y <= 6.0; y += 0.35) {
            const Vec2 a = interpolate(fine_mesh, fine.positions, {2 * x, 2 * y});
            const Vec2 b = 2.0 * interpolate(coarse, map.positions, {x, y});
            CHECK(norm(a - b) < 1e-12);
        }
    }
}

TEST_CASE("multires with zero levels equals register + refine") {
    RegistrationConfig cfg;
    cfg.patches_per_side = 4;
    cfg.sparsify_k = 8;
    cfg.levels = 0;
    const ImagePair pair = translated_blob(32, 5.0);
    const auto c = correlation_for(pair.moving, pair.fixed, cfg);
    const auto multi = register_multires(pair.moving, pair.fixed, c, cfg);
    const RegistrationProblem problem(pair.moving, pair.fixed, c, cfg);
    const auto direct = refine_intensity(problem, register_images(problem));
    CHECK(multi.state.map.positions == direct.map.positions);
    CHECK(multi.trace.size() == direct.trace.size());

    cfg.levels = 2;
    const Image img = smooth_pattern(32, 32, 0.2);
    const auto ident = register_multires(img, img, diagonal(16), cfg);
    CHECK(map_distance(ident.state.map, identity_map(build_grid_mesh(32, 32))) <= 1e-3);

    cfg.levels = 3;
    CHECK_THROWS_AS(register_multires(smooth_pattern(36, 36), smooth_pattern(36, 36), diagonal(16), cfg), InvalidDimensionError);
}

TEST_CASE("pyramid reduces finest-level work on the translated blob") {
    const ImagePair pair = translated_blob();
    RegistrationConfig cfg;
    const auto c = correlation_for(pair.moving, pair.fixed, cfg);
    auto finest_iterations = [&](int levels) {
        cfg.levels = levels;
        const auto r = register_multires(pair.moving, pair.fixed, c, cfg);
        int n = 0;
        for (const auto &t : r.trace) n += t.level == 0 && t.iteration > 0;
        return n;
    };
    const int with_pyramid = finest_iterations(2);
    const int without = finest_iterations(0);
    INFO("levels=2: " << with_pyramid << ", levels=0: " << without);
    CHECK(with_pyramid < without);
}
