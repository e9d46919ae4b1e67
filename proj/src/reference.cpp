#include "qcreg/reference.hpp"

#include <cmath>

#include "qcreg/errors.hpp"

namespace qcreg::reference {

BeltramiField compute_mu(const QCMap &map, const TriMesh &mesh) {
    if (map.positions.size() != mesh.n_vertices()) throw ShapeError("map does not match mesh");
    BeltramiField mu;
    mu.values.resize(mesh.n_faces());
    for (std::size_t f = 0; f < mesh.n_faces(); ++f) {
        const FaceJacobian J = face_jacobian(mesh, map.positions, f);
        const Complex fz = J.dz();
        if (std::abs(fz) < 0.5e-12) throw SingularFaceError("Beltrami denominator vanishes", f);
        mu.values[f] = J.dzbar() / fz;
    }
    return mu;
}

Image warp_image(const QCMap &map, const Image &image) {
    Image out(image.height, image.width);
    for (int r = 0; r < image.height; ++r) {
        for (int c = 0; c < image.width; ++c) {
            out.at(r, c) = sample_image(image, map.positions[static_cast<std::size_t>(r * (image.width + 1) + c)]);
        }
    }
    return out;
}

VectorField intensity_descent(const Image &moving, const Image &fixed, const QCMap &map) {
    VectorField out(map.positions.size());
    for (int r = 0; r < fixed.height; ++r) {
        for (int c = 0; c < fixed.width; ++c) {
            const auto v = static_cast<std::size_t>(r * (fixed.width + 1) + c);
            const Vec2 p = map.positions[v];
            const double res = moving.at(r, c) - sample_image(fixed, p);
            out[v] = 2.0 * res * sample_gradient(fixed, p);
        }
    }
    return out;
}

VectorField demon_force(const Image &moving, const Image &warped_static, double alpha) {
    const ImageGradient gs = image_gradient(warped_static);
    const ImageGradient gm = image_gradient(moving);
    VectorField out(moving.size());
    for (int r = 0; r < moving.height; ++r) {
        for (int c = 0; c < moving.width; ++c) {
            const double d = moving.at(r, c) - warped_static.at(r, c);
            const Vec2 s{gs.gx.at(r, c), gs.gy.at(r, c)};
            const Vec2 m{gm.gx.at(r, c), gm.gy.at(r, c)};
            Vec2 u;
            const double ds = dot(s, s) + alpha * alpha * d * d;
            if (ds >= 1e-12) u += (d / ds) * s;
            const double dm = dot(m, m) + alpha * alpha * d * d;
            if (dm >= 1e-12) u += (d / dm) * m;
            out[static_cast<std::size_t>(r * moving.width + c)] = u;
        }
    }
    return out;
}

VectorField gaussian_blur_field(const VectorField &field, int rows, int cols, double sigma) {
    const int radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
    auto weight = [sigma](int t) { return std::exp(-0.5 * t * t / (sigma * sigma)); };
    VectorField tmp(field.size()), out(field.size());
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            Vec2 acc;
            double wsum = 0.0;
            for (int t = -radius; t <= radius; ++t) {
                if (c + t < 0 || c + t >= cols) continue;
                acc += weight(t) * field[static_cast<std::size_t>(r * cols + c + t)];
                wsum += weight(t);
            }
            tmp[static_cast<std::size_t>(r * cols + c)] = acc * (1.0 / wsum);
        }
    }
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            Vec2 acc;
            double wsum = 0.0;
            for (int t = -radius; t <= radius; ++t) {
                if (r + t < 0 || r + t >= rows) continue;
                acc += weight(t) * tmp[static_cast<std::size_t>((r + t) * cols + c)];
                wsum += weight(t);
            }
            out[static_cast<std::size_t>(r * cols + c)] = acc * (1.0 / wsum);
        }
    }
    return out;
}

CorrelationMatrix correlation_raw(const FeatureBank &moving, const FeatureBank &fixed) {
    if (moving.m != fixed.m || moving.d != fixed.d) throw ShapeError("feature banks differ");
    auto unit = [](const FeatureBank &b, std::size_t i) {
        std::vector<double> v(b.d);
        double sq = 0.0;
        for (std::size_t k = 0; k < b.d; ++k) {
            v[k] = b.vector(i)[k];
            sq += v[k] * v[k];
        }
        if (!(sq > 0.0)) throw ZeroVectorError("feature vector " + std::to_string(i) + " has zero norm");
        const double inv = 1.0 / std::sqrt(sq);
        for (double &x : v) x *= inv;
        return v;
    };
    CorrelationMatrix c;
    c.stage = CorrelationStage::Raw;
    c.values.resize(moving.m, fixed.m);
    for (std::size_t i = 0; i < moving.m; ++i) {
        const auto a = unit(moving, i);
        for (std::size_t j = 0; j < fixed.m; ++j) {
            const auto b = unit(fixed, j);
            double s = 0.0;
            for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
            c.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = s;
        }
    }
    return c;
}

} // namespace qcreg::reference
