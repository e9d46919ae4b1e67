#include "qcreg/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

namespace qcreg {

namespace {

constexpr double kEdge = 1.5; // logistic edge width, pixels
constexpr double kBackground = 0.05;
constexpr double kForeground = 0.95;

// Intensity for a signed distance (negative inside the shape).
double shade(double signed_distance) {
    const double inside = 1.0 / (1.0 + std::exp(signed_distance / kEdge));
    return kBackground + (kForeground - kBackground) * inside;
}

Image render(int size, const std::function<double(double, double)> &signed_distance) {
    Image img(size, size);
    for (int r = 0; r < size; ++r) {
        for (int c = 0; c < size; ++c) img.at(r, c) = shade(signed_distance(c, r));
    }
    return img;
}

} // namespace

ImagePair translated_blob(int size, double shift) {
    const double s = size / 128.0;
    const double radius = 24.0 * s, cx = 48.0 * s, cy = 64.0 * s;
    auto disk = [=](double x0) {
        return [=](double x, double y) { return std::hypot(x - x0, y - cy) - radius; };
    };
    return {"translated_blob", render(size, disk(cx)), render(size, disk(cx + shift * s))};
}

ImagePair bent_bar(int size) {
    const double s = size / 128.0;
    const double half_width = 10.0 * s, top = 24.0 * s, bottom = 104.0 * s, centre = 64.0 * s, amp = 16.0 * s;
    auto bar = [=](bool bent) {
        return [=](double x, double y) {
            const double t = std::clamp((y - top) / (bottom - top), 0.0, 1.0);
            const double cx = bent ? centre + amp * std::sin(std::numbers::pi * t) : centre;
            const double dx = std::abs(x - cx) - half_width;
            const double dy = std::max(top - y, y - bottom);
            return std::max(dx, dy);
        };
    };
    return {"bent_bar", render(size, bar(false)), render(size, bar(true))};
}

ImagePair warped_disk(int size) {
    const double s = size / 128.0;
    const double c = 64.0 * s, r = 28.0 * s, a = 36.0 * s, b = 22.0 * s;
    auto disk = [=](double x, double y) { return std::hypot(x - c, y - c) - r; };
    auto ellipse = [=](double x, double y) {
        // Distance approximated by scaling the normalized radius with the local semi-axis.
        const double u = (x - c) / a, v = (y - c) / b;
        const double q = std::hypot(u, v);
        if (q == 0.0) return -std::min(a, b);
        const double boundary = std::hypot(u / q * a, v / q * b);
        return (q - 1.0) * boundary;
    };
    return {"warped_disk", render(size, disk), render(size, ellipse)};
}

std::vector<ImagePair> shipped_examples() { return {translated_blob(), bent_bar(), warped_disk()}; }

Image smooth_pattern(int height, int width, double phase) {
    Image img(height, width);
    const double two_pi = 2.0 * std::numbers::pi;
    for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
            const double u = static_cast<double>(c) / width, v = static_cast<double>(r) / height;
            const double val = std::sin(two_pi * u + phase) * std::cos(two_pi * v) + 0.5 * std::sin(two_pi * (u + v));
            img.at(r, c) = 0.5 + 0.4 * val / 1.5;
        }
    }
    return img;
}

} // namespace qcreg
