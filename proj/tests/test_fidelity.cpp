// Correspondence matrix, fidelity energy and descent, rasterization and smoothing.

#include <doctest.h>

#include <cmath>
#include <random>

#include "qcreg/errors.hpp"
#include "qcreg/fidelity.hpp"

using namespace qcreg;

namespace {

CorrespondenceState single_pair(Vec2 g, Vec2 x, double sigma = 1.0) {
    return {sigma, {g}, {x}, {g}};
}

CorrelationMatrix sparsified(Eigen::MatrixXd v) { return {CorrelationStage::Sparsified, std::move(v)}; }

// Random state: one nonzero per row, centres scattered within a few sigma.
std::pair<CorrelationMatrix, CorrespondenceState> random_state(std::uint64_t seed, int m = 9) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> pos(0.0, 30.0), off(-6.0, 6.0), w(0.1, 1.0);
    std::uniform_int_distribution<int> col(0, m - 1);
    CorrespondenceState s;
    s.sigma = 4.0;
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(m, m);
    for (int i = 0; i < m; ++i) {
        s.moving_centers.push_back({pos(rng), pos(rng)});
        s.static_centers.push_back({pos(rng), pos(rng)});
    }
    for (int i = 0; i < m; ++i) {
        const int j = col(rng);
        c(i, j) = w(rng);
        s.mapped_centers.push_back(s.static_centers[static_cast<std::size_t>(j)] + Vec2{off(rng), off(rng)});
    }
    return {sparsified(c), s};
}

} // namespace

TEST_CASE("correspondence_matrix") {
    CHECK(correspondence_matrix(single_pair({2, 3}, {2, 3}))(0, 0) == 1.0);
    CHECK(correspondence_matrix(single_pair({0, 0}, {0.6, 0.8}))(0, 0) == doctest::Approx(0.3679).epsilon(1e-4));
    const double far = correspondence_matrix(single_pair({0, 0}, {30, 0}, 3.0))(0, 0);
    CHECK(far == doctest::Approx(std::exp(-100.0)).epsilon(1e-10));
    CHECK(far == doctest::Approx(3.7e-44).epsilon(0.01));
}

TEST_CASE("fidelity_energy") {
    Eigen::MatrixXd c = Eigen::MatrixXd::Zero(2, 2), d = Eigen::MatrixXd::Constant(2, 2, 0.2);
    CHECK(fidelity_energy(sparsified(c), d) == 0.0);
    c(0, 1) = 0.7;
    d(0, 1) = 1.0;
    CHECK(fidelity_energy(sparsified(c), d) == 0.0);
    Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1), e1(1, 1);
    e1(0, 0) = std::exp(-1.0);
    CHECK(fidelity_energy(sparsified(one), e1) == doctest::Approx(0.3996).epsilon(1e-4));
    CHECK_THROWS_AS(fidelity_energy(CorrelationMatrix{CorrelationStage::Eliminated, one}, e1), StageError);
    CHECK_THROWS_AS(fidelity_energy(sparsified(one), d), ShapeError);
}

TEST_CASE("fidelity_descent examples") {
    const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1);
    const auto s = single_pair({1, 0}, {0, 0});
    const Vec2 exact = fidelity_descent(sparsified(one), s)[0];
    CHECK(exact.x == doctest::Approx(4.0 * (std::exp(-1.0) - 1.0) * std::exp(-1.0)));
    CHECK(exact.x == doctest::Approx(-0.9302).epsilon(1e-4));
    CHECK(exact.y == 0.0);
    const Vec2 spring = fidelity_spring_direction(sparsified(one), s)[0];
    CHECK(spring.x == doctest::Approx(-2.5285).epsilon(1e-4));
    CHECK(spring.y == 0.0);

    CHECK(norm(fidelity_descent(sparsified(one), single_pair({3, 4}, {3, 4}))[0]) == 0.0);
    const auto zero = fidelity_descent(sparsified(Eigen::MatrixXd::Zero(1, 1)), s);
    CHECK(norm(zero[0]) == 0.0);
}

TEST_CASE("fidelity_descent is the negative gradient") {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        auto [c, s] = random_state(seed);
        const auto descent = fidelity_descent(c, s);
        const double h = 1e-5;
        double err = 0.0, scale = 0.0;
        for (std::size_t i = 0; i < s.mapped_centers.size(); ++i) {
            for (int axis = 0; axis < 2; ++axis) {
                auto plus = s, minus = s;
                (axis ? plus.mapped_centers[i].y : plus.mapped_centers[i].x) += h;
                (axis ? minus.mapped_centers[i].y : minus.mapped_centers[i].x) -= h;
                const double grad = (fidelity_energy(c, plus) - fidelity_energy(c, minus)) / (2 * h);
                const double got = axis ? descent[i].y : descent[i].x;
                err = std::max(err, std::abs(got + grad));
                scale = std::max(scale, std::abs(grad));
            }
        }
        REQUIRE(scale > 0.0);
        CHECK(err / scale <= 1e-4);

        // The spring form is a positive per-row rescaling, so still a descent direction.
        const auto spring = fidelity_spring_direction(c, s);
        for (std::size_t i = 0; i < spring.size(); ++i) CHECK(dot(spring[i], descent[i]) >= 0.0);
    }
}

TEST_CASE("rasterize_descent") {
    const TriMesh mesh = build_grid_mesh(20, 20);
    const PatchGrid grid = partition_patches(20, 20, 2);
    VectorField single(4, Vec2{});
    single[1] = {1.0, -2.0};
    const auto r = rasterize_descent(single, grid, mesh);
    for (std::size_t v = 0; v < mesh.n_vertices(); ++v) {
        const bool inside = grid.patch_at(mesh.positions[v]) == 1;
        CHECK((norm(r[v]) != 0.0) == inside);
    }

    const auto constant = rasterize_descent(VectorField(4, Vec2{0.5, 0.25}), grid, mesh);
    for (const Vec2 &v : constant) CHECK(v == Vec2{0.5, 0.25});

    VectorField opposite{{1, 0}, {-1, 0}, {0, 0}, {0, 0}};
    const auto o = rasterize_descent(opposite, grid, mesh);
    CHECK(o[mesh.vertex_index(3, 9)].x == 1.0);
    CHECK(o[mesh.vertex_index(3, 10)].x == -1.0);
}

TEST_CASE("gaussian_smooth_field") {
    const int rows = 51, cols = 61;
    const VectorField c(rows * cols, Vec2{0.3, -1.1});
    for (const Vec2 &v : gaussian_smooth_field(c, rows, cols, 200.0)) {
        CHECK(v.x == doctest::Approx(0.3).epsilon(1e-14));
        CHECK(v.y == doctest::Approx(-1.1).epsilon(1e-14));
    }
    for (const Vec2 &v : gaussian_smooth_field(VectorField(rows * cols), rows, cols, 200.0)) CHECK(v == Vec2{});

    VectorField spike(rows * cols);
    spike[25 * cols + 30] = {1.0, 2.0};
    const auto s = gaussian_smooth_field(spike, rows, cols, 200.0);
    Vec2 total{};
    for (const Vec2 &v : s) total += v;
    CHECK(total.x == doctest::Approx(1.0).epsilon(1e-6));
    CHECK(total.y == doctest::Approx(2.0).epsilon(1e-6));
    CHECK(s[25 * cols + 30].x < 1.0);
    CHECK(s[25 * cols + 34].x > 0.0);

    std::mt19937_64 rng(2);
    std::normal_distribution<double> n;
    VectorField noise(rows * cols);
    double sup_in = 0.0;
    for (auto &v : noise) {
        v = {n(rng), n(rng)};
        sup_in = std::max({sup_in, std::abs(v.x), std::abs(v.y)});
    }
    double sup_out = 0.0;
    for (const Vec2 &v : gaussian_smooth_field(noise, rows, cols, 128.0)) sup_out = std::max({sup_out, std::abs(v.x), std::abs(v.y)});
    CHECK(sup_out <= sup_in);

    CHECK_THROWS_AS(gaussian_smooth_field(VectorField(5), rows, cols, 100.0), ShapeError);
}

TEST_CASE("make_correspondence_state") {
    const TriMesh mesh = build_grid_mesh(40, 40);
    const PatchGrid grid = partition_patches(40, 40, 4);
    QCMap map = identity_map(mesh);
    const auto s = make_correspondence_state(grid, map, mesh, 1.5);
    CHECK(s.sigma == doctest::Approx(15.0));
    for (std::size_t i = 0; i < grid.size(); ++i) {
        CHECK(s.mapped_centers[i].x == doctest::Approx(grid.centers[i].x));
        CHECK(s.mapped_centers[i].y == doctest::Approx(grid.centers[i].y));
    }
    for (auto &p : map.positions) p = {0.5 * p.x + 3.0, p.y};
    const auto t = make_correspondence_state(grid, map, mesh, 1.0);
    CHECK(t.mapped_centers[5].x == doctest::Approx(0.5 * grid.centers[5].x + 3.0));
}
