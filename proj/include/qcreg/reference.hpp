#pragma once

// Serial, straightforward versions of the parallel kernels. Used by tests to
// check the OpenMP paths and by the benchmark as the baseline.

#include "qcreg/beltrami.hpp"
#include "qcreg/features.hpp"
#include "qcreg/image.hpp"
#include "qcreg/mesh.hpp"

namespace qcreg::reference {

BeltramiField compute_mu(const QCMap &map, const TriMesh &mesh);
Image warp_image(const QCMap &map, const Image &image);
VectorField intensity_descent(const Image &moving, const Image &fixed, const QCMap &map);
VectorField demon_force(const Image &moving, const Image &warped_static, double alpha);
VectorField gaussian_blur_field(const VectorField &field, int rows, int cols, double sigma);
CorrelationMatrix correlation_raw(const FeatureBank &moving, const FeatureBank &fixed);

} // namespace qcreg::reference
