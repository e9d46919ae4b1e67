// Sampling, warping, intensity descent, demon force and histogram matching.

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "qcreg/fidelity.hpp"
#include "qcreg/intensity.hpp"
#include "qcreg/synthetic.hpp"

using namespace qcreg;

namespace {

Image ramp(int h, int w) {
    Image img(h, w);
    for (int r = 0; r < h; ++r)
        for (int c = 0; c < w; ++c) img.at(r, c) = static_cast<double>(c) / w;
    return img;
}

QCMap shifted(const TriMesh &mesh, Vec2 by) {
    QCMap map = identity_map(mesh);
    for (auto &p : map.positions) p += by;
    return map;
}

Image noise_image(int h, int w, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Image img(h, w);
    for (double &v : img.pixels) v = u(rng);
    return img;
}

} // namespace

TEST_CASE("sample_image") {
    Image img(2, 2);
    img.pixels = {0.0, 1.0, 0.25, 0.75};
    CHECK(sample_image(img, {1, 0}) == 1.0);
    CHECK(sample_image(img, {0, 1}) == 0.25);
    CHECK(sample_image(img, {0.5, 0}) == 0.5);
    CHECK(sample_image(img, {0.5, 0.5}) == doctest::Approx(0.5));
    CHECK(sample_image(img, {-3, -3}) == 0.0);
    CHECK(sample_image(img, {7, 0}) == 1.0);
    CHECK(sample_image(img, {7, 9}) == 0.75);
}

TEST_CASE("sample_gradient is the derivative of sample_image") {
    const Image img = noise_image(9, 11, 2);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> x(-1.0, 11.0), y(-1.0, 9.0);
    const double h = 1e-7;
    for (int k = 0; k < 500; ++k) {
        const Vec2 p{x(rng), y(rng)};
        const Vec2 g = sample_gradient(img, p);
        CHECK(g.x == doctest::Approx((sample_image(img, {p.x + h, p.y}) - sample_image(img, {p.x - h, p.y})) / (2 * h)).epsilon(1e-6));
        CHECK(g.y == doctest::Approx((sample_image(img, {p.x, p.y + h}) - sample_image(img, {p.x, p.y - h})) / (2 * h)).epsilon(1e-6));
    }
    // On pixel centres it reduces to central differences, one-sided halves at the border.
    const ImageGradient cd = image_gradient(img);
    CHECK(sample_gradient(img, {4, 3}).x == doctest::Approx(cd.gx.at(3, 4)));
    CHECK(sample_gradient(img, {4, 3}).y == doctest::Approx(cd.gy.at(3, 4)));
    CHECK(sample_gradient(img, {0, 3}).x == doctest::Approx(0.5 * (img.at(3, 1) - img.at(3, 0))));
}

TEST_CASE("warp_image") {
    const Image s = noise_image(13, 17, 3);
    const TriMesh mesh = build_grid_mesh(13, 17);
    CHECK(warp_image(identity_map(mesh), s).pixels == s.pixels);

    const Image flat(13, 17, 0.4);
    for (double v : warp_image(shifted(mesh, {3, -2}), flat).pixels) CHECK(v == 0.4);

    Image edge(8, 10, 0.0);
    for (int r = 0; r < 8; ++r)
        for (int c = 5; c < 10; ++c) edge.at(r, c) = 1.0;
    const Image w = warp_image(shifted(build_grid_mesh(8, 10), {1, 0}), edge);
    for (int r = 0; r < 8; ++r) {
        for (int c = 0; c < 9; ++c) CHECK(w.at(r, c) == edge.at(r, c + 1));
        CHECK(w.at(r, 3) == 0.0);
        CHECK(w.at(r, 4) == 1.0);
    }
}

TEST_CASE("intensity_descent examples") {
    const Image s = smooth_pattern(20, 24, 0.2);
    const TriMesh mesh = build_grid_mesh(20, 24);
    for (const Vec2 &v : intensity_descent(warp_image(identity_map(mesh), s), s, identity_map(mesh))) CHECK(v == Vec2{});
    for (const Vec2 &v : intensity_descent(s, Image(20, 24, 0.5), identity_map(mesh))) CHECK(v == Vec2{});

    // Ramp x/w shifted by one pixel: residual -1/w, gradient (1/w, 0).
    const int w = 24;
    const Image r = ramp(20, w);
    const auto d = intensity_descent(r, r, shifted(mesh, {1, 0}));
    const Vec2 v = d[static_cast<std::size_t>(mesh.vertex_index(10, 10))];
    CHECK(v.x == doctest::Approx(-2.0 / (w * w)));
    CHECK(v.y == doctest::Approx(0.0));
    // Last row/column carry no pixel.
    CHECK(d[static_cast<std::size_t>(mesh.vertex_index(20, 5))] == Vec2{});
    CHECK(d[static_cast<std::size_t>(mesh.vertex_index(5, 24))] == Vec2{});
}

TEST_CASE("intensity_descent matches finite differences on smooth images") {
    const int h = 32, w = 32;
    const Image moving = smooth_pattern(h, w, 0.0), fixed = smooth_pattern(h, w, 0.9);
    const TriMesh mesh = build_grid_mesh(h, w);
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> off(-0.3, 0.3);
    QCMap map = identity_map(mesh);
    for (std::size_t v = 0; v < map.positions.size(); ++v) {
        if (!mesh.boundary[v]) map.positions[v] += Vec2{off(rng), off(rng)};
    }
    const auto descent = intensity_descent(moving, fixed, map);
    const double step = 1e-6;
    double err = 0.0, scale = 0.0;
    for (int i = 2; i < h - 2; i += 3) {
        for (int j = 2; j < w - 2; j += 3) {
            const auto v = static_cast<std::size_t>(mesh.vertex_index(i, j));
            for (int axis = 0; axis < 2; ++axis) {
                QCMap plus = map, minus = map;
                (axis ? plus.positions[v].y : plus.positions[v].x) += step;
                (axis ? minus.positions[v].y : minus.positions[v].x) -= step;
                const double grad = (intensity_energy(moving, fixed, plus) - intensity_energy(moving, fixed, minus)) / (2 * step);
                const double got = axis ? descent[v].y : descent[v].x;
                err = std::max(err, std::abs(got + grad));
                scale = std::max(scale, std::abs(grad));
            }
        }
    }
    REQUIRE(scale > 0.0);
    CHECK(err / scale <= 1e-3);
}

TEST_CASE("demon_force") {
    const Image s = noise_image(10, 10, 5);
    for (const Vec2 &v : demon_force(s, s, 1.0)) CHECK(v == Vec2{});
    for (const Vec2 &v : demon_force(Image(10, 10, 0.7), Image(10, 10, 0.2), 1.0)) CHECK(v == Vec2{});

    // Linear images: gradients (1, 0) everywhere, difference 0.5.
    Image m(5, 5), f(5, 5);
    for (int r = 0; r < 5; ++r) {
        for (int c = 0; c < 5; ++c) {
            f.at(r, c) = c;
            m.at(r, c) = c + 0.5;
        }
    }
    const Vec2 u = demon_force(m, f, 1.0)[2 * 5 + 2];
    CHECK(u.x == doctest::Approx(0.8));
    CHECK(u.y == doctest::Approx(0.0));

    for (double alpha : {0.5, 1.0, 3.0}) {
        const auto a = noise_image(30, 30, 6), b = noise_image(30, 30, 7);
        for (const Vec2 &v : demon_force(a, b, alpha)) CHECK(norm(v) <= 1.0 / alpha + 1e-12);
    }
}

TEST_CASE("pixels_to_vertices") {
    VectorField px(6);
    for (std::size_t k = 0; k < 6; ++k) px[k] = {double(k), 0};
    const auto v = pixels_to_vertices(px, 2, 3);
    REQUIRE(v.size() == 12);
    CHECK(v[0].x == 0);
    CHECK(v[3].x == 2);
    CHECK(v[4].x == 3);
    CHECK(v[11].x == 5);
}

TEST_CASE("demons_refine_step") {
    const Image s = smooth_pattern(32, 32, 0.4);
    const TriMesh mesh = build_grid_mesh(32, 32);
    for (const Vec2 &v : demons_refine_step(s, s, identity_map(mesh), 1.0)) CHECK(v == Vec2{});

    const Image m = smooth_pattern(32, 32, 0.0);
    const auto force = pixels_to_vertices(demon_force(m, s, 1.0), 32, 32);
    const auto expected = gaussian_smooth_field(force, 33, 33, 32.0);
    const auto got = demons_refine_step(m, s, identity_map(mesh), 1.0, 1);
    for (std::size_t k = 0; k < got.size(); ++k) CHECK(got[k] == expected[k]);

    // Static ramp sampled one pixel to the right: the update pulls the map back (-x).
    const Image r = ramp(32, 32);
    const auto back = demons_refine_step(r, r, shifted(mesh, {1, 0}), 1.0);
    const Vec2 mid = back[static_cast<std::size_t>(mesh.vertex_index(16, 12))];
    CHECK(mid.x < 0.0);
    CHECK(std::abs(mid.y) < 1e-12);
}

TEST_CASE("histogram_match") {
    const Image ref = noise_image(40, 40, 8);
    const Image same = histogram_match(ref, ref);
    for (std::size_t k = 0; k < ref.size(); ++k) CHECK(std::abs(same.pixels[k] - ref.pixels[k]) <= 1.0 / 256);

    // Constant source lands on the reference's median bin.
    std::vector<double> sorted = ref.pixels;
    std::sort(sorted.begin(), sorted.end());
    const double median = sorted[(sorted.size() + 1) / 2 - 1];
    const double centre = (std::min(255.0, std::floor(median * 256)) + 0.5) / 256;
    for (double v : histogram_match(Image(40, 40, 0.3), ref).pixels) CHECK(v == doctest::Approx(centre));

    // Per-bin CDF deviation, source spread evenly over the bins.
    Image src(64, 64);
    for (std::size_t k = 0; k < src.size(); ++k) src.pixels[k] = (static_cast<double>((k * 1237) % src.size()) + 0.5) / static_cast<double>(src.size());
    const Image big_ref = noise_image(50, 70, 9);
    const Image out = histogram_match(src, big_ref);
    auto cdf = [](const Image &img) {
        std::vector<double> c(256, 0.0);
        for (double v : img.pixels) c[static_cast<std::size_t>(std::min(255.0, std::floor(v * 256)))] += 1.0;
        for (std::size_t b = 1; b < 256; ++b) c[b] += c[b - 1];
        for (double &x : c) x /= static_cast<double>(img.size());
        return c;
    };
    const auto a = cdf(out), b = cdf(big_ref);
    for (std::size_t k = 0; k < 256; ++k) CHECK(std::abs(a[k] - b[k]) <= 1.0 / 256 + 1.0 / static_cast<double>(src.size()));
    for (std::size_t j = 0; j < src.size(); ++j) {
        const std::size_t k = (j * 7 + 3) % src.size();
        if (src.pixels[j] < src.pixels[k]) CHECK(out.pixels[j] <= out.pixels[k]);
    }
}
