#pragma once

#include <cstddef>
#include <vector>

#include "qcreg/types.hpp"

namespace qcreg {

/// Row-major grid of scalars. Registration inputs hold intensities in [0, 1];
/// the same type stores derived grids such as gradients.
struct Image {
    int height = 0;
    int width = 0;
    std::vector<double> pixels;

    Image() = default;
    Image(int h, int w, double fill = 0.0)
        : height(h), width(w), pixels(static_cast<std::size_t>(h) * static_cast<std::size_t>(w), fill) {}

    double &at(int r, int c) noexcept { return pixels[static_cast<std::size_t>(r) * static_cast<std::size_t>(width) + static_cast<std::size_t>(c)]; }
    double at(int r, int c) const noexcept { return pixels[static_cast<std::size_t>(r) * static_cast<std::size_t>(width) + static_cast<std::size_t>(c)]; }
    std::size_t size() const noexcept { return pixels.size(); }
};

/// Throws ShapeError on a dimension/payload mismatch, InvalidDimensionError if
/// a value is non-finite or outside [0, 1].
void check_intensity_image(const Image &image);

/// Bilinear interpolation with pixel (r, c) centred at (x, y) = (c, r).
/// Points outside the pixel-centre rectangle are clamped onto it.
double sample_image(const Image &image, Vec2 point) noexcept;

/// Derivative of sample_image with respect to the point. Where the
/// interpolant has a kink (integer coordinates, clamp edges) this is the mean
/// of the one-sided derivatives.
Vec2 sample_gradient(const Image &image, Vec2 point) noexcept;

/// Central differences, one-sided on the border.
struct ImageGradient {
    Image gx;
    Image gy;
};

ImageGradient image_gradient(const Image &image);

/// 2x box downsampling. Odd trailing rows/columns are dropped.
Image downsample2(const Image &image);

} // namespace qcreg
