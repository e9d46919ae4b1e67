#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Sparse>

#include "qcreg/types.hpp"

namespace qcreg {

/// Regular triangulation of an h x w pixel rectangle.
///
/// Vertex (i, j) with 0 <= i <= h, 0 <= j <= w sits at pixel coordinate
/// (x, y) = (j, i), origin top-left, and has index i * (w + 1) + j. Cell (i, j)
/// is split along its (j+1, i)-(j, i+1) diagonal into faces 2k and 2k+1,
/// k = i * w + j, both with positive signed area.
struct TriMesh {
    int height = 0;
    int width = 0;
    std::vector<Vec2> positions;
    std::vector<std::array<int, 3>> faces;
    std::vector<bool> boundary;
    // CSR layout of the faces incident to each vertex.
    std::vector<int> ring_offsets;
    std::vector<int> ring_faces;

    std::size_t n_vertices() const noexcept { return positions.size(); }
    std::size_t n_faces() const noexcept { return faces.size(); }
    int vertex_index(int i, int j) const noexcept { return i * (width + 1) + j; }

    std::span<const int> one_ring(std::size_t v) const noexcept {
        return {ring_faces.data() + ring_offsets[v],
                static_cast<std::size_t>(ring_offsets[v + 1] - ring_offsets[v])};
    }
};

/// Throws InvalidDimensionError if either side is below 2.
TriMesh build_grid_mesh(int height, int width);

/// Symmetric sparse operator; for the Laplacian this stores -Delta (PSD).
struct SparseSPDSystem {
    int dimension = 0;
    Eigen::SparseMatrix<double> matrix;
};

/// Cotangent Laplacian with weights (cot a + cot b) / 2, returned negated.
/// Throws DegenerateMeshError on zero-area faces.
SparseSPDSystem cotangent_laplacian(const TriMesh &mesh);

/// One-ring average (unweighted) from faces to vertices.
std::vector<Complex> face_to_vertex(std::span<const Complex> face_field, const TriMesh &mesh);

/// Three-vertex average from vertices to faces.
std::vector<Complex> vertex_to_face(std::span<const Complex> vertex_field, const TriMesh &mesh);

struct FaceLocation {
    std::size_t face = 0;
    std::array<double, 3> weights{}; // barycentric, aligned with faces[face]
};

/// Locates a point (clamped into the mesh rectangle) and returns its barycentric weights.
FaceLocation locate(const TriMesh &mesh, Vec2 point);

/// Piecewise-linear interpolation of a per-vertex field.
Vec2 interpolate(const TriMesh &mesh, std::span<const Vec2> vertex_field, Vec2 point);

} // namespace qcreg
