#include "qcreg/image.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "qcreg/errors.hpp"

namespace qcreg {

void check_intensity_image(const Image &image) {
    if (image.height <= 0 || image.width <= 0 ||
        image.pixels.size() != static_cast<std::size_t>(image.height) * static_cast<std::size_t>(image.width)) {
        throw ShapeError("image payload does not match " + std::to_string(image.height) + "x" +
                         std::to_string(image.width));
    }
    for (std::size_t k = 0; k < image.pixels.size(); ++k) {
        const double v = image.pixels[k];
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
            throw InvalidDimensionError("intensity " + std::to_string(v) + " at pixel " + std::to_string(k) +
                                        " is outside [0, 1]");
        }
    }
}

double sample_image(const Image &image, Vec2 point) noexcept {
    const double x = std::clamp(point.x, 0.0, static_cast<double>(image.width - 1));
    const double y = std::clamp(point.y, 0.0, static_cast<double>(image.height - 1));
    const int c0 = std::min(static_cast<int>(x), image.width - 1);
    const int r0 = std::min(static_cast<int>(y), image.height - 1);
    const int c1 = std::min(c0 + 1, image.width - 1);
    const int r1 = std::min(r0 + 1, image.height - 1);
    const double tx = x - c0;
    const double ty = y - r0;
    const double top = image.at(r0, c0) + tx * (image.at(r0, c1) - image.at(r0, c0));
    const double bottom = image.at(r1, c0) + tx * (image.at(r1, c1) - image.at(r1, c0));
    return top + ty * (bottom - top);
}

namespace {

// d/dt of the interpolant along one axis at coordinate t in [0, n - 1];
// `slope(k)` is the derivative inside cell [k, k + 1].
template <class Slope>
double axis_derivative(double t, int n, Slope &&slope) {
    if (n < 2 || t < 0.0 || t > n - 1) return 0.0;
    const double k = std::floor(t);
    if (t != k) return slope(static_cast<int>(k));
    const int c = static_cast<int>(k);
    const double left = c >= 1 ? slope(c - 1) : 0.0;
    const double right = c <= n - 2 ? slope(c) : 0.0;
    return 0.5 * (left + right);
}

} // namespace

Vec2 sample_gradient(const Image &image, Vec2 point) noexcept {
    const double x = std::clamp(point.x, 0.0, static_cast<double>(image.width - 1));
    const double y = std::clamp(point.y, 0.0, static_cast<double>(image.height - 1));
    const int c0 = std::min(static_cast<int>(x), image.width - 1);
    const int r0 = std::min(static_cast<int>(y), image.height - 1);
    const int c1 = std::min(c0 + 1, image.width - 1);
    const int r1 = std::min(r0 + 1, image.height - 1);
    const double tx = x - c0, ty = y - r0;
    auto x_slope = [&](int c) {
        return (1.0 - ty) * (image.at(r0, c + 1) - image.at(r0, c)) + ty * (image.at(r1, c + 1) - image.at(r1, c));
    };
    auto y_slope = [&](int r) {
        return (1.0 - tx) * (image.at(r + 1, c0) - image.at(r, c0)) + tx * (image.at(r + 1, c1) - image.at(r, c1));
    };
    return {axis_derivative(point.x, image.width, x_slope), axis_derivative(point.y, image.height, y_slope)};
}

ImageGradient image_gradient(const Image &image) {
    const int h = image.height, w = image.width;
    ImageGradient g{Image(h, w), Image(h, w)};
#pragma omp parallel for schedule(static)
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            double gx = 0.0, gy = 0.0;
            if (w > 1) {
                if (c == 0) gx = image.at(r, 1) - image.at(r, 0);
                else if (c == w - 1) gx = image.at(r, w - 1) - image.at(r, w - 2);
                else gx = 0.5 * (image.at(r, c + 1) - image.at(r, c - 1));
            }
            if (h > 1) {
                if (r == 0) gy = image.at(1, c) - image.at(0, c);
                else if (r == h - 1) gy = image.at(h - 1, c) - image.at(h - 2, c);
                else gy = 0.5 * (image.at(r + 1, c) - image.at(r - 1, c));
            }
            g.gx.at(r, c) = gx;
            g.gy.at(r, c) = gy;
        }
    }
    return g;
}

Image downsample2(const Image &image) {
    const int h = image.height / 2, w = image.width / 2;
    if (h < 1 || w < 1) throw InvalidDimensionError("image too small to downsample");
    Image out(h, w);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            out.at(r, c) = 0.25 * (image.at(2 * r, 2 * c) + image.at(2 * r, 2 * c + 1) +
                                   image.at(2 * r + 1, 2 * c) + image.at(2 * r + 1, 2 * c + 1));
        }
    }
    return out;
}

} // namespace qcreg
