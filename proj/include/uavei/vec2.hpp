// Minimal 2-D vector used for planar positions (meters).
#pragma once

#include <cmath>

namespace uavei {

inline constexpr double kPi = 3.14159265358979323846;

struct Vec2 {
    double x = 0.0;
    double y = 0.0;
};

inline Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.y + b.y}; }
inline Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.y - b.y}; }
inline Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.y}; }

inline double norm_sq(Vec2 a) { return a.x * a.x + a.y * a.y; }
inline double norm(Vec2 a) { return std::sqrt(norm_sq(a)); }
inline double dist(Vec2 a, Vec2 b) { return norm(a - b); }
inline double dist_sq(Vec2 a, Vec2 b) { return norm_sq(a - b); }

// Heading of the ray a->b in radians within [-pi, pi]; 0 when a == b.
inline double bearing(Vec2 a, Vec2 b) {
    const Vec2 d = b - a;
    if (d.x == 0.0 && d.y == 0.0) return 0.0;
    return std::atan2(d.y, d.x);
}

} // namespace uavei
