#include "laneforge/geometry.hpp"

#include <algorithm>
#include <limits>

namespace laneforge {

std::optional<double> ray_segment_hit(Vec2 origin, Vec2 dir, Vec2 a, Vec2 b) {
    const Vec2 e = b - a;
    const double denom = cross(dir, e);
    if (denom == 0.0) return std::nullopt;
    const Vec2 w = a - origin;
    const double t = cross(w, e) / denom;
    const double u = cross(w, dir) / denom;
    if (t < 0.0 || u < 0.0 || u > 1.0) return std::nullopt;
    return t;
}

std::optional<double> segment_crossing(Vec2 p0, Vec2 p1, Vec2 a, Vec2 b) {
    const Vec2 d = p1 - p0;
    const Vec2 e = b - a;
    const double denom = cross(d, e);
    const Vec2 w = a - p0;
    if (denom == 0.0) {
        // Parallel: only collinear overlap counts.
        if (cross(w, d) != 0.0) return std::nullopt;
        const double dd = dot(d, d);
        if (dd == 0.0) {
            return point_segment_distance(p0, a, b) == 0.0 ? std::optional<double>(0.0) : std::nullopt;
        }
        const double ta = dot(a - p0, d) / dd;
        const double tb = dot(b - p0, d) / dd;
        const double lo = std::max(0.0, std::min(ta, tb));
        const double hi = std::min(1.0, std::max(ta, tb));
        if (lo > hi) return std::nullopt;
        return lo;
    }
    const double s = cross(w, e) / denom;
    const double u = cross(w, d) / denom;
    if (s < 0.0 || s > 1.0 || u < 0.0 || u > 1.0) return std::nullopt;
    return s;
}

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
    const Vec2 e = b - a;
    const double ee = dot(e, e);
    double t = ee > 0.0 ? dot(p - a, e) / ee : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return (p - (a + e * t)).norm();
}

double point_polyline_distance(Vec2 p, std::span<const Vec2> poly) {
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < poly.size(); ++i) {
        best = std::min(best, point_segment_distance(p, poly[i - 1], poly[i]));
    }
    if (poly.size() == 1) best = (p - poly[0]).norm();
    return best;
}

double segment_segment_distance(Vec2 p0, Vec2 p1, Vec2 a, Vec2 b) {
    if (segment_crossing(p0, p1, a, b)) return 0.0;
    return std::min({point_segment_distance(p0, a, b), point_segment_distance(p1, a, b),
                     point_segment_distance(a, p0, p1), point_segment_distance(b, p0, p1)});
}

bool point_in_polygon(Vec2 p, std::span<const Vec2> poly) {
    const std::size_t n = poly.size();
    if (n < 3) return false;
    bool inside = false;
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2 a = poly[j], b = poly[i];
        if (point_segment_distance(p, a, b) == 0.0) return true;
        if ((b.y > p.y) != (a.y > p.y)) {
            const double x = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < x) inside = !inside;
        }
    }
    return inside;
}

double polyline_length(std::span<const Vec2> poly) {
    double len = 0.0;
    for (std::size_t i = 1; i < poly.size(); ++i) len += (poly[i] - poly[i - 1]).norm();
    return len;
}

Vec2 polyline_point_at(std::span<const Vec2> poly, double s) {
    if (poly.empty()) return {};
    if (s <= 0.0) return poly.front();
    for (std::size_t i = 1; i < poly.size(); ++i) {
        const double seg = (poly[i] - poly[i - 1]).norm();
        if (s <= seg && seg > 0.0) return poly[i - 1] + (poly[i] - poly[i - 1]) * (s / seg);
        s -= seg;
    }
    return poly.back();
}

}  // namespace laneforge
