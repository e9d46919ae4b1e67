#include "qcreg/beltrami.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qcreg/errors.hpp"

namespace qcreg {

namespace {

void check_map(const QCMap &map, const TriMesh &mesh) {
    if (map.positions.size() != mesh.n_vertices()) {
        throw ShapeError("map has " + std::to_string(map.positions.size()) + " positions, mesh has " +
                         std::to_string(mesh.n_vertices()) + " vertices");
    }
}

} // namespace

double BeltramiField::sup_norm() const noexcept {
    double s = 0.0;
    for (const auto &v : values) s = std::max(s, std::abs(v));
    return s;
}

QCMap identity_map(const TriMesh &mesh) {
    return QCMap{mesh.height, mesh.width, mesh.positions};
}

FaceJacobian face_jacobian(const TriMesh &mesh, std::span<const Vec2> mapped, std::size_t face) {
    const auto &tri = mesh.faces[face];
    const Vec2 e1 = mesh.positions[tri[1]] - mesh.positions[tri[0]];
    const Vec2 e2 = mesh.positions[tri[2]] - mesh.positions[tri[0]];
    const Vec2 d1 = mapped[tri[1]] - mapped[tri[0]];
    const Vec2 d2 = mapped[tri[2]] - mapped[tri[0]];
    // J [e1 e2] = [d1 d2]
    const double inv_det = 1.0 / cross(e1, e2);
    const double a = e2.y * inv_det, b = -e2.x * inv_det;
    const double c = -e1.y * inv_det, d = e1.x * inv_det;
    FaceJacobian J;
    J.ux = d1.x * a + d2.x * c;
    J.uy = d1.x * b + d2.x * d;
    J.vx = d1.y * a + d2.y * c;
    J.vy = d1.y * b + d2.y * d;
    return J;
}

BeltramiField compute_mu(const QCMap &map, const TriMesh &mesh) {
    check_map(map, mesh);
    BeltramiField mu;
    mu.values.resize(mesh.n_faces());
    const auto nf = static_cast<long>(mesh.n_faces());
    long bad_face = nf;
#pragma omp parallel for schedule(static) reduction(min : bad_face)
    for (long f = 0; f < nf; ++f) {
        const FaceJacobian J = face_jacobian(mesh, map.positions, static_cast<std::size_t>(f));
        const Complex fz = J.dz();
        if (std::abs(fz) < 0.5e-12) {
            // 2|f_z| is the denominator of the component form.
            bad_face = std::min(bad_face, f);
            continue;
        }
        mu.values[static_cast<std::size_t>(f)] = J.dzbar() / fz;
    }
    if (bad_face < nf) {
        throw SingularFaceError("Beltrami denominator vanishes", static_cast<std::size_t>(bad_face));
    }
    return mu;
}

double maximal_dilation(const BeltramiField &mu) {
    const double s = mu.sup_norm();
    if (!(s < 1.0)) {
        throw NonQuasiconformalError("|mu|_inf = " + std::to_string(s) + " is not below 1");
    }
    return (1.0 + s) / (1.0 - s);
}

BeltramiField truncate_mu(const BeltramiField &mu, double bound) {
    BeltramiField out = mu;
    for (auto &v : out.values) {
        const double m = std::abs(v);
        if (m > bound) v *= bound / m;
    }
    return out;
}

std::vector<double> mapped_face_areas(const QCMap &map, const TriMesh &mesh) {
    check_map(map, mesh);
    std::vector<double> areas(mesh.n_faces());
    const auto nf = static_cast<long>(mesh.n_faces());
#pragma omp parallel for schedule(static)
    for (long f = 0; f < nf; ++f) {
        const auto &tri = mesh.faces[static_cast<std::size_t>(f)];
        areas[static_cast<std::size_t>(f)] =
            signed_area(map.positions[tri[0]], map.positions[tri[1]], map.positions[tri[2]]);
    }
    return areas;
}

std::size_t count_flipped_faces(const QCMap &map, const TriMesh &mesh) {
    const auto areas = mapped_face_areas(map, mesh);
    return static_cast<std::size_t>(std::count_if(areas.begin(), areas.end(), [](double a) { return a <= 0.0; }));
}

} // namespace qcreg
