#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "qcreg/image.hpp"
#include "qcreg/types.hpp"

namespace qcreg {

struct PixelRect {
    int x0 = 0, y0 = 0; // inclusive
    int x1 = 0, y1 = 0; // exclusive
};

/// p x p tiling of an image, patches in row-major order. The last row and
/// column of patches absorb any remainder pixels.
struct PatchGrid {
    int patches_per_side = 0;
    int image_height = 0;
    int image_width = 0;
    std::vector<PixelRect> rects;
    std::vector<Vec2> centers; // centroid of the pixel centres inside each rect

    std::size_t size() const noexcept { return rects.size(); }
    /// Patch index owning pixel coordinate (x, y); clamps outside the image.
    std::size_t patch_at(Vec2 point) const noexcept;
    /// Mean distance between neighbouring centres, in pixels.
    double center_spacing() const noexcept;
};

/// Throws PartitionError if p < 2 or the image is smaller than p on a side.
PatchGrid partition_patches(int image_height, int image_width, int patches_per_side);
inline PatchGrid partition_patches(const Image &image, int patches_per_side) {
    return partition_patches(image.height, image.width, patches_per_side);
}

/// m feature vectors of dimension d, stored vector-major.
struct FeatureBank {
    std::uint32_t m = 0;
    std::uint32_t d = 0;
    std::vector<float> values;

    const float *vector(std::size_t i) const noexcept { return values.data() + i * d; }
};

enum class Descriptor {
    RawIntensity,      // 16x16 resampled window, d = 256
    GradientHistogram, // 4x4 cells x 8 orientation bins, d = 128
};

inline constexpr int kRawWindow = 16;
inline constexpr int kHogCells = 4;
inline constexpr int kHogBins = 8;
inline constexpr float kDescriptorEpsilon = 1e-6f;

FeatureBank extract_features_builtin(const Image &image, const PatchGrid &grid, Descriptor descriptor);

/// QCF1: "QCF1", u32 LE m, u32 LE d, then m*d f32 LE. Exact length enforced.
FeatureBank load_features(const std::filesystem::path &path);
FeatureBank parse_features(const std::vector<std::uint8_t> &bytes);
void write_features(const std::filesystem::path &path, const FeatureBank &bank);
std::vector<std::uint8_t> serialize_features(const FeatureBank &bank);

enum class CorrelationStage { Raw, Normalized, Eliminated, Sparsified };
std::string_view to_string(CorrelationStage stage) noexcept;

struct CorrelationMatrix {
    CorrelationStage stage = CorrelationStage::Raw;
    Eigen::MatrixXd values; // rows: moving patches, columns: static patches
};

/// Cosines between unit-normalized moving and static vectors.
CorrelationMatrix correlation_raw(const FeatureBank &moving, const FeatureBank &fixed);

/// Per-row z-score with the population standard deviation; constant rows become zero.
CorrelationMatrix row_normalize(const CorrelationMatrix &raw);

inline constexpr double kDuplicateRowTolerance = 1e-6;

/// Zeroes every row that duplicates some other row within kDuplicateRowTolerance per entry.
CorrelationMatrix eliminate_background(const CorrelationMatrix &normalized);

/// Keeps each row's maximum, then only the k largest of those, clamped to >= 0.
CorrelationMatrix sparsify(const CorrelationMatrix &eliminated, int k);

/// raw -> normalized -> eliminated -> sparsified.
CorrelationMatrix build_correlation(const FeatureBank &moving, const FeatureBank &fixed, int k);

} // namespace qcreg
