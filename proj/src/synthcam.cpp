#include "laneforge/synthcam.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "laneforge/hashing.hpp"

namespace laneforge {
namespace {

constexpr double kTextureCell = 0.03;
constexpr std::uint64_t kTextureSalt = 0x7a5e1d3c2b4f6a81ull;
constexpr int kSkyCells = 48;

double smooth(double t) { return t * t * (3.0 - 2.0 * t); }

double lattice(std::int64_t ix, std::int64_t iy) {
    return 2.0 * unit_double(hash64(std::uint64_t(ix), std::uint64_t(iy), kTextureSalt)) - 1.0;
}

double sky_lattice(std::uint64_t seed, int i) {
    return unit_double(hash64(seed, std::uint64_t((i % kSkyCells + kSkyCells) % kSkyCells), 0x5c1eull));
}

double surface_level(SurfaceClass c, Vec2 p) {
    switch (c) {
        case SurfaceClass::Marker: return kMarkerLevel;
        case SurfaceClass::Asphalt: return kAsphaltLevel + asphalt_texture(p);
        case SurfaceClass::OffTrack: break;
    }
    return kOffTrackLevel;
}

}  // namespace

void CameraConfig::validate() const {
    if (width_px <= 0 || height_px <= 0) throw std::invalid_argument("camera size must be positive");
    if (width_px != static_cast<int>(std::lround(height_px * width_ratio))) {
        throw std::invalid_argument("camera width must equal round(height x width_ratio)");
    }
    if (!(vertical_fov_deg > 0.0 && vertical_fov_deg < 180.0)) throw std::invalid_argument("vertical fov must be in (0, 180)");
    if (!(mount_height_m > 0.0)) throw std::invalid_argument("mount height must be positive");
}

CameraConfig CameraConfig::with_ratio(int height_px, double width_ratio, double vertical_fov_deg) {
    CameraConfig c;
    c.height_px = height_px;
    c.width_ratio = width_ratio;
    c.width_px = static_cast<int>(std::lround(height_px * width_ratio));
    c.vertical_fov_deg = vertical_fov_deg;
    return c;
}

EnvState env_at(std::uint64_t seed, double time_s) {
    double s = 0.0;
    for (std::uint64_t k = 0; k < 3; ++k) {
        const double freq = 0.02 + 0.08 * unit_double(hash64(seed, k, 1));
        const double phase = 2.0 * kPi * unit_double(hash64(seed, k, 2));
        s += std::sin(2.0 * kPi * freq * time_s + phase) / 3.0;
    }
    const double sf = 0.05 + 0.1 * unit_double(hash64(seed, 7, 3));
    const double sphase = 2.0 * kPi * unit_double(hash64(seed, 7, 4));
    EnvState env;
    env.rng_seed = seed;
    env.light_gain = 1.1 + 0.25 * s;
    env.speckle_phase = std::clamp(0.5 + 0.5 * std::sin(2.0 * kPi * sf * time_s + sphase), 0.0, 1.0);
    return env;
}

double asphalt_texture(Vec2 p) {
    const double gx = p.x / kTextureCell, gy = p.y / kTextureCell;
    const double fx = std::floor(gx), fy = std::floor(gy);
    const auto ix = static_cast<std::int64_t>(fx), iy = static_cast<std::int64_t>(fy);
    const double tx = smooth(gx - fx), ty = smooth(gy - fy);
    const double a = lattice(ix, iy) + (lattice(ix + 1, iy) - lattice(ix, iy)) * tx;
    const double b = lattice(ix, iy + 1) + (lattice(ix + 1, iy + 1) - lattice(ix, iy + 1)) * tx;
    return kTextureAmplitude * (a + (b - a) * ty);
}

double background_level(std::uint64_t seed, double azimuth, double elevation) {
    double turns = azimuth / (2.0 * kPi);
    turns -= std::floor(turns);
    const double g = turns * kSkyCells;
    const double fg = std::floor(g);
    const int i = static_cast<int>(fg);
    const double t = smooth(g - fg);
    const double n = sky_lattice(seed, i) + (sky_lattice(seed, i + 1) - sky_lattice(seed, i)) * t;
    const double e = std::clamp(elevation / 0.6, 0.0, 1.0);
    return 5.0 + 55.0 * (0.65 * n + 0.35 * e);
}

std::optional<Vec2> pixel_ground_point(const Pose& pose, const CameraConfig& cam, int u, int v) {
    const double f = cam.focal_px();
    const double p = deg_to_rad(cam.pitch_down_deg);
    const double yc = (v + 0.5 - 0.5 * cam.height_px) / f;
    const double xc = (u + 0.5 - 0.5 * cam.width_px) / f;
    const double down = std::sin(p) + yc * std::cos(p);
    if (!(down > 0.0)) return std::nullopt;
    const double t = cam.mount_height_m / down;
    const Vec2 local{t * (std::cos(p) - yc * std::sin(p)), -t * xc};
    return pose.position + pose.forward() * cam.mount_forward_m + rotate(local, pose.heading);
}

std::optional<double> pixel_ground_range(const CameraConfig& cam, int u, int v) {
    const auto g = pixel_ground_point(Pose{}, cam, u, v);
    if (!g) return std::nullopt;
    return (*g - Vec2{cam.mount_forward_m, 0.0}).norm();
}

std::optional<std::pair<double, double>> project_ground_point(const Pose& pose, const CameraConfig& cam, Vec2 p) {
    const Vec2 eye = pose.position + pose.forward() * cam.mount_forward_m;
    const Vec2 local = rotate(p - eye, -pose.heading);
    const double pr = deg_to_rad(cam.pitch_down_deg);
    const double h = cam.mount_height_m;
    const double z = local.x * std::cos(pr) + h * std::sin(pr);
    if (!(z > 0.0)) return std::nullopt;
    const double f = cam.focal_px();
    const double u = (-local.y / z) * f + 0.5 * cam.width_px - 0.5;
    const double v = ((-local.x * std::sin(pr) + h * std::cos(pr)) / z) * f + 0.5 * cam.height_px - 0.5;
    if (u < -0.5 || u >= cam.width_px - 0.5 || v < -0.5 || v >= cam.height_px - 0.5) return std::nullopt;
    return std::pair{u, v};
}

Frame render_clean(const Pose& pose, const CameraConfig& cam, const Track& track, const EnvState& env) {
    return render_scene(
        pose, cam, [&](Vec2 p) { return surface_level(track.sample_surface(p), p); },
        [&](double az, double el) { return background_level(env.rng_seed, az, el); }, env.light_gain);
}

Frame render(const Pose& pose, const CameraConfig& cam, const Track& track, const EnvState& env, double time_s,
             std::uint64_t seq) {
    Frame f = render_clean(pose, cam, track, env);
    f.timestamp = time_s;
    f.seq = seq;
    return speckle(f, env);
}

RgbFrame render_rgb(const Pose& pose, const CameraConfig& cam, const Track& track, const EnvState& env) {
    static constexpr double kTint[3][3] = {{235, 235, 235}, {45, 45, 48}, {12, 10, 10}};
    RgbFrame out(cam.width_px, cam.height_px);
    for (int ch = 0; ch < 3; ++ch) {
        const Frame plane = render_scene(
            pose, cam,
            [&](Vec2 p) {
                const SurfaceClass c = track.sample_surface(p);
                const double base = kTint[static_cast<int>(c)][ch];
                return c == SurfaceClass::Asphalt ? base + asphalt_texture(p) : base;
            },
            [&](double az, double el) { return background_level(env.rng_seed, az, el); }, env.light_gain);
        for (std::size_t i = 0; i < plane.pixels.size(); ++i) out.rgb[3 * i + std::size_t(ch)] = plane.pixels[i];
    }
    return out;
}

Frame speckle(const Frame& frame, const EnvState& env) {
    Frame out = frame;
    const double fraction = 0.02 * std::clamp(env.speckle_phase, 0.0, 1.0);
    if (fraction <= 0.0) return out;
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        const std::uint64_t h = hash64(env.rng_seed, frame.seq, i);
        if (unit_double(h) >= fraction) continue;
        const double u1 = 1.0 - unit_double(mix64(h ^ 0x1234));
        const double u2 = unit_double(mix64(h ^ 0x5678));
        const double g = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
        const long raise = std::max(1L, std::lround(std::abs(40.0 * g)));
        out.pixels[i] = static_cast<std::uint8_t>(std::min(255L, out.pixels[i] + raise));
    }
    return out;
}

Frame render_minimap(const Track& track, const Pose& pose, int size_px, std::span<const Vec2> coins) {
    if (size_px <= 0) throw std::invalid_argument("minimap size must be positive");
    Frame out(size_px, size_px);
    const Aabb b = track.bounds();
    const double margin = std::max(2.0, 0.04 * size_px);
    const double extent = std::max(b.hi.x - b.lo.x, b.hi.y - b.lo.y);
    const double scale = (size_px - 2.0 * margin) / extent;  // px per meter
    const Vec2 mid = (b.lo + b.hi) * 0.5;
    auto to_world = [&](double px, double py) {
        return Vec2{mid.x + (px - 0.5 * size_px) / scale, mid.y - (py - 0.5 * size_px) / scale};
    };
    auto to_pixel = [&](Vec2 w) {
        return Vec2{0.5 * size_px + (w.x - mid.x) * scale, 0.5 * size_px - (w.y - mid.y) * scale};
    };
    auto stamp = [&](Vec2 lo_w, Vec2 hi_w, auto&& inside, std::uint8_t value) {
        const Vec2 a = to_pixel(lo_w), c = to_pixel(hi_w);
        const int x0 = std::max(0, int(std::floor(std::min(a.x, c.x)))), x1 = std::min(size_px - 1, int(std::ceil(std::max(a.x, c.x))));
        const int y0 = std::max(0, int(std::floor(std::min(a.y, c.y)))), y1 = std::min(size_px - 1, int(std::ceil(std::max(a.y, c.y))));
        for (int y = y0; y <= y1; ++y) {
            for (int x = x0; x <= x1; ++x) {
                if (inside(to_world(x + 0.5, y + 0.5))) out.at(x, y) = value;
            }
        }
    };

    for (int y = 0; y < size_px; ++y) {
        for (int x = 0; x < size_px; ++x) {
            if (track.sample_surface(to_world(x + 0.5, y + 0.5)) != SurfaceClass::OffTrack) out.at(x, y) = kMinimapCorridor;
        }
    }
    const double tol = std::max(0.5 * track.params().marker_width_m, 0.75 / scale);
    for (const auto& tile : track.tiles()) {
        for (const auto& line : tile.markers) {
            for (std::size_t i = 0; i + 1 < line.size(); ++i) {
                const Vec2 p = line[i], q = line[i + 1];
                stamp(Vec2{std::min(p.x, q.x) - tol, std::min(p.y, q.y) - tol},
                      Vec2{std::max(p.x, q.x) + tol, std::max(p.y, q.y) + tol},
                      [&](Vec2 w) { return point_segment_distance(w, p, q) <= tol; }, kMinimapMarker);
            }
        }
    }
    const double coin_r = 2.0 / scale;
    for (const Vec2 c : coins) {
        stamp(c - Vec2{coin_r, coin_r}, c + Vec2{coin_r, coin_r}, [&](Vec2 w) { return (w - c).norm() <= coin_r; },
              kMinimapCoin);
    }
    const double len = 5.0 / scale;
    const Vec2 tip = pose.position + pose.forward() * len;
    const Vec2 l = pose.position - pose.forward() * (0.5 * len) + pose.left() * (0.6 * len);
    const Vec2 r = pose.position - pose.forward() * (0.5 * len) - pose.left() * (0.6 * len);
    const Polyline tri{tip, l, r};
    stamp(pose.position - Vec2{len, len}, pose.position + Vec2{len, len},
          [&](Vec2 w) { return point_in_polygon(w, tri); }, kMinimapVehicle);
    const Vec2 c = to_pixel(pose.position);
    const int cx = int(std::floor(c.x)), cy = int(std::floor(c.y));
    if (cx >= 0 && cx < size_px && cy >= 0 && cy < size_px) out.at(cx, cy) = kMinimapVehicle;
    return out;
}

}  // namespace laneforge
