#pragma once

#include <cmath>
#include <optional>
#include <span>
#include <vector>

namespace laneforge {

inline constexpr double kPi = 3.14159265358979323846;

constexpr double deg_to_rad(double deg) { return deg * kPi / 180.0; }
constexpr double rad_to_deg(double rad) { return rad * 180.0 / kPi; }

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2 operator+(Vec2 o) const { return {x + o.x, y + o.y}; }
    constexpr Vec2 operator-(Vec2 o) const { return {x - o.x, y - o.y}; }
    constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
    constexpr Vec2 operator-() const { return {-x, -y}; }
    constexpr bool operator==(const Vec2&) const = default;

    double norm() const { return std::hypot(x, y); }
};

constexpr double dot(Vec2 a, Vec2 b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(Vec2 a, Vec2 b) { return a.x * b.y - a.y * b.x; }
inline Vec2 unit_from_angle(double rad) { return {std::cos(rad), std::sin(rad)}; }
/// Counter-clockwise rotation.
inline Vec2 rotate(Vec2 v, double rad) {
    const double c = std::cos(rad), s = std::sin(rad);
    return {c * v.x - s * v.y, s * v.x + c * v.y};
}
/// Left-hand normal of a direction.
constexpr Vec2 left_normal(Vec2 d) { return {-d.y, d.x}; }

struct Pose {
    Vec2 position;
    double heading = 0.0;  // radians, CCW from +x

    Vec2 forward() const { return unit_from_angle(heading); }
    Vec2 left() const { return left_normal(forward()); }
    Vec2 to_world(Vec2 local) const { return position + rotate(local, heading); }
};

struct Segment {
    Vec2 a;
    Vec2 b;
};

using Polyline = std::vector<Vec2>;

struct Aabb {
    Vec2 lo{1e300, 1e300};
    Vec2 hi{-1e300, -1e300};

    void expand(Vec2 p) {
        lo = {std::fmin(lo.x, p.x), std::fmin(lo.y, p.y)};
        hi = {std::fmax(hi.x, p.x), std::fmax(hi.y, p.y)};
    }
    bool overlaps(const Aabb& o) const {
        return lo.x <= o.hi.x && o.lo.x <= hi.x && lo.y <= o.hi.y && o.lo.y <= hi.y;
    }
};

/// Parameter t >= 0 along `dir` where the ray hits segment [a,b], if it does.
/// Parallel and collinear configurations report no hit.
std::optional<double> ray_segment_hit(Vec2 origin, Vec2 dir, Vec2 a, Vec2 b);

/// Fraction s in [0,1] along p0->p1 where it meets segment [a,b] (closed segments).
std::optional<double> segment_crossing(Vec2 p0, Vec2 p1, Vec2 a, Vec2 b);

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b);
double point_polyline_distance(Vec2 p, std::span<const Vec2> poly);
double segment_segment_distance(Vec2 p0, Vec2 p1, Vec2 a, Vec2 b);

/// Even-odd rule; points on an edge count as inside.
bool point_in_polygon(Vec2 p, std::span<const Vec2> poly);

double polyline_length(std::span<const Vec2> poly);
/// Point at arc length `s` along the polyline (clamped to its ends).
Vec2 polyline_point_at(std::span<const Vec2> poly, double s);

}  // namespace laneforge
