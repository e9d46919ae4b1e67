#include "qcreg/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qcreg/errors.hpp"

namespace qcreg {

TriMesh build_grid_mesh(int height, int width) {
    if (height < 2 || width < 2) {
        throw InvalidDimensionError("grid mesh needs at least 2x2 pixels, got " +
                                    std::to_string(height) + "x" + std::to_string(width));
    }
    TriMesh mesh;
    mesh.height = height;
    mesh.width = width;

    const std::size_t nv = static_cast<std::size_t>(height + 1) * static_cast<std::size_t>(width + 1);
    mesh.positions.resize(nv);
    mesh.boundary.resize(nv);
    for (int i = 0; i <= height; ++i) {
        for (int j = 0; j <= width; ++j) {
            const auto v = static_cast<std::size_t>(mesh.vertex_index(i, j));
            mesh.positions[v] = {static_cast<double>(j), static_cast<double>(i)};
            mesh.boundary[v] = (i == 0 || j == 0 || i == height || j == width);
        }
    }

    mesh.faces.reserve(2 * static_cast<std::size_t>(height) * static_cast<std::size_t>(width));
    for (int i = 0; i < height; ++i) {
        for (int j = 0; j < width; ++j) {
            const int v00 = mesh.vertex_index(i, j);
            const int v10 = mesh.vertex_index(i, j + 1);
            const int v01 = mesh.vertex_index(i + 1, j);
            const int v11 = mesh.vertex_index(i + 1, j + 1);
            mesh.faces.push_back({v00, v10, v01});
            mesh.faces.push_back({v10, v11, v01});
        }
    }

    std::vector<int> counts(nv, 0);
    for (const auto &f : mesh.faces) {
        for (int v : f) ++counts[static_cast<std::size_t>(v)];
    }
    mesh.ring_offsets.assign(nv + 1, 0);
    for (std::size_t v = 0; v < nv; ++v) mesh.ring_offsets[v + 1] = mesh.ring_offsets[v] + counts[v];
    mesh.ring_faces.resize(static_cast<std::size_t>(mesh.ring_offsets[nv]));
    std::vector<int> cursor(mesh.ring_offsets.begin(), mesh.ring_offsets.end() - 1);
    for (std::size_t f = 0; f < mesh.faces.size(); ++f) {
        for (int v : mesh.faces[f]) {
            mesh.ring_faces[static_cast<std::size_t>(cursor[static_cast<std::size_t>(v)]++)] = static_cast<int>(f);
        }
    }
    return mesh;
}

SparseSPDSystem cotangent_laplacian(const TriMesh &mesh) {
    const auto n = static_cast<int>(mesh.n_vertices());
    std::vector<Eigen::Triplet<double>> triplets;
    triplets.reserve(mesh.n_faces() * 9);

    for (std::size_t f = 0; f < mesh.n_faces(); ++f) {
        const auto &tri = mesh.faces[f];
        const Vec2 p[3] = {mesh.positions[tri[0]], mesh.positions[tri[1]], mesh.positions[tri[2]]};
        const double twice_area = cross(p[1] - p[0], p[2] - p[0]);
        if (!(std::abs(twice_area) > 1e-14)) {
            throw DegenerateMeshError("zero-area face " + std::to_string(f));
        }
        for (int k = 0; k < 3; ++k) {
            // Angle at corner k is opposite the edge (k+1, k+2).
            const int a = (k + 1) % 3;
            const int b = (k + 2) % 3;
            const Vec2 e1 = p[a] - p[k];
            const Vec2 e2 = p[b] - p[k];
            const double w = 0.5 * dot(e1, e2) / std::abs(cross(e1, e2));
            triplets.emplace_back(tri[a], tri[b], -w);
            triplets.emplace_back(tri[b], tri[a], -w);
            triplets.emplace_back(tri[a], tri[a], w);
            triplets.emplace_back(tri[b], tri[b], w);
        }
    }

    SparseSPDSystem sys;
    sys.dimension = n;
    sys.matrix.resize(n, n);
    sys.matrix.setFromTriplets(triplets.begin(), triplets.end());
    return sys;
}

std::vector<Complex> face_to_vertex(std::span<const Complex> face_field, const TriMesh &mesh) {
    if (face_field.size() != mesh.n_faces()) {
        throw ShapeError("face field has " + std::to_string(face_field.size()) + " values, mesh has " +
                         std::to_string(mesh.n_faces()) + " faces");
    }
    std::vector<Complex> out(mesh.n_vertices());
    const auto nv = static_cast<long>(mesh.n_vertices());
#pragma omp parallel for schedule(static)
    for (long v = 0; v < nv; ++v) {
        const auto ring = mesh.one_ring(static_cast<std::size_t>(v));
        Complex sum{0.0, 0.0};
        for (int f : ring) sum += face_field[static_cast<std::size_t>(f)];
        out[static_cast<std::size_t>(v)] = sum / static_cast<double>(ring.size());
    }
    return out;
}

std::vector<Complex> vertex_to_face(std::span<const Complex> vertex_field, const TriMesh &mesh) {
    if (vertex_field.size() != mesh.n_vertices()) {
        throw ShapeError("vertex field has " + std::to_string(vertex_field.size()) + " values, mesh has " +
                         std::to_string(mesh.n_vertices()) + " vertices");
    }
    std::vector<Complex> out(mesh.n_faces());
    const auto nf = static_cast<long>(mesh.n_faces());
#pragma omp parallel for schedule(static)
    for (long f = 0; f < nf; ++f) {
        const auto &tri = mesh.faces[static_cast<std::size_t>(f)];
        out[static_cast<std::size_t>(f)] =
            (vertex_field[tri[0]] + vertex_field[tri[1]] + vertex_field[tri[2]]) / 3.0;
    }
    return out;
}

FaceLocation locate(const TriMesh &mesh, Vec2 point) {
    const double x = std::clamp(point.x, 0.0, static_cast<double>(mesh.width));
    const double y = std::clamp(point.y, 0.0, static_cast<double>(mesh.height));
    const int j = std::min(static_cast<int>(std::floor(x)), mesh.width - 1);
    const int i = std::min(static_cast<int>(std::floor(y)), mesh.height - 1);
    const double fx = x - j;
    const double fy = y - i;
    const std::size_t cell = static_cast<std::size_t>(i) * static_cast<std::size_t>(mesh.width) +
                             static_cast<std::size_t>(j);
    FaceLocation loc;
    if (fx + fy <= 1.0) {
        // (v00, v10, v01)
        loc.face = 2 * cell;
        loc.weights = {1.0 - fx - fy, fx, fy};
    } else {
        // (v10, v11, v01)
        loc.face = 2 * cell + 1;
        loc.weights = {1.0 - fy, fx + fy - 1.0, 1.0 - fx};
    }
    return loc;
}

Vec2 interpolate(const TriMesh &mesh, std::span<const Vec2> vertex_field, Vec2 point) {
    const FaceLocation loc = locate(mesh, point);
    const auto &tri = mesh.faces[loc.face];
    return loc.weights[0] * vertex_field[tri[0]] + loc.weights[1] * vertex_field[tri[1]] +
           loc.weights[2] * vertex_field[tri[2]];
}

} // namespace qcreg
