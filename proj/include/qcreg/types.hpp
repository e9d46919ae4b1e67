#pragma once

#include <cmath>
#include <complex>
#include <vector>

namespace qcreg {

using Complex = std::complex<double>;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2 &operator+=(Vec2 o) noexcept { x += o.x; y += o.y; return *this; }
    constexpr Vec2 &operator-=(Vec2 o) noexcept { x -= o.x; y -= o.y; return *this; }
    constexpr Vec2 &operator*=(double s) noexcept { x *= s; y *= s; return *this; }

    friend constexpr Vec2 operator+(Vec2 a, Vec2 b) noexcept { return {a.x + b.x, a.y + b.y}; }
    friend constexpr Vec2 operator-(Vec2 a, Vec2 b) noexcept { return {a.x - b.x, a.y - b.y}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) noexcept { return {s * a.x, s * a.y}; }
    friend constexpr Vec2 operator*(Vec2 a, double s) noexcept { return {s * a.x, s * a.y}; }
    friend constexpr bool operator==(Vec2 a, Vec2 b) noexcept = default;
};

constexpr double dot(Vec2 a, Vec2 b) noexcept { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) noexcept { return a.x * b.y - a.y * b.x; }
inline double norm(Vec2 a) noexcept { return std::hypot(a.x, a.y); }

// Half the cross product of (b-a, c-a); positive for faces ordered like the rest mesh.
constexpr double signed_area(Vec2 a, Vec2 b, Vec2 c) noexcept {
    return 0.5 * cross(b - a, c - a);
}

// Per-vertex displacement (descent) field in pixel units.
using VectorField = std::vector<Vec2>;

} // namespace qcreg
