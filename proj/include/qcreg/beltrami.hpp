#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "qcreg/mesh.hpp"
#include "qcreg/types.hpp"

namespace qcreg {

/// One complex coefficient per face of the owning mesh.
struct BeltramiField {
    std::vector<Complex> values;

    std::size_t size() const noexcept { return values.size(); }
    double sup_norm() const noexcept;
};

/// Per-vertex mapped positions f(v) in pixel coordinates.
struct QCMap {
    int height = 0;
    int width = 0;
    std::vector<Vec2> positions;
};

QCMap identity_map(const TriMesh &mesh);

/// Constant partial derivatives of a piecewise-linear map on one face.
struct FaceJacobian {
    double ux = 0.0, uy = 0.0, vx = 0.0, vy = 0.0;

    Complex dz() const noexcept { return {0.5 * (ux + vy), 0.5 * (vx - uy)}; }
    Complex dzbar() const noexcept { return {0.5 * (ux - vy), 0.5 * (vx + uy)}; }
    double det() const noexcept { return ux * vy - uy * vx; }
};

FaceJacobian face_jacobian(const TriMesh &mesh, std::span<const Vec2> mapped, std::size_t face);

/// mu = f_zbar / f_z per face. Throws SingularFaceError when |f_z| < 1e-12.
BeltramiField compute_mu(const QCMap &map, const TriMesh &mesh);

/// K = (1 + |mu|_inf) / (1 - |mu|_inf). Throws NonQuasiconformalError if |mu|_inf >= 1.
double maximal_dilation(const BeltramiField &mu);

/// Rescales every coefficient with modulus above `bound` onto the circle of radius `bound`.
BeltramiField truncate_mu(const BeltramiField &mu, double bound);

/// Signed area of each mapped face.
std::vector<double> mapped_face_areas(const QCMap &map, const TriMesh &mesh);

/// Number of mapped faces with signed area <= 0.
std::size_t count_flipped_faces(const QCMap &map, const TriMesh &mesh);

} // namespace qcreg
