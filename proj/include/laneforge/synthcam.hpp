#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <utility>

#include "laneforge/frame.hpp"
#include "laneforge/geometry.hpp"
#include "laneforge/trackkit.hpp"

namespace laneforge {

struct CameraConfig {
    int width_px = 160;
    int height_px = 120;
    double vertical_fov_deg = 48.8;
    double width_ratio = 4.0 / 3.0;
    double mount_height_m = 0.12;
    double mount_forward_m = 0.10;  // ahead of the vehicle reference point
    double pitch_down_deg = 15.0;

    /// Throws std::invalid_argument on a violated invariant.
    void validate() const;
    /// Height kept; width re-derived from the ratio.
    static CameraConfig with_ratio(int height_px, double width_ratio, double vertical_fov_deg);

    double focal_px() const { return 0.5 * height_px / std::tan(deg_to_rad(vertical_fov_deg) * 0.5); }
    /// Fractional row (pixel-center coordinates) of the horizon line.
    double horizon_row() const {
        return 0.5 * height_px - focal_px() * std::tan(deg_to_rad(pitch_down_deg)) - 0.5;
    }
};

struct EnvState {
    std::uint64_t rng_seed = 0;
    double light_gain = 1.0;     // [0.5, 1.5]
    double speckle_phase = 0.0;  // [0, 1]
};

/// Lighting and speckle drift as a pure function of (seed, sim time).
EnvState env_at(std::uint64_t seed, double time_s);

inline constexpr double kMarkerLevel = 230.0;
inline constexpr double kAsphaltLevel = 40.0;
inline constexpr double kOffTrackLevel = 10.0;
inline constexpr double kTextureAmplitude = 15.0;

/// Static asphalt texture in [-amplitude, amplitude] at a world point.
double asphalt_texture(Vec2 p);
/// Background band intensity in [5, 60] for a world-frame ray direction.
double background_level(std::uint64_t seed, double azimuth, double elevation);

/// Ground point seen through the center of pixel (u, v), if the ray points
/// below the horizon.
std::optional<Vec2> pixel_ground_point(const Pose& pose, const CameraConfig& cam, int u, int v);
/// Distance from the camera to the ground hit of pixel (u, v).
std::optional<double> pixel_ground_range(const CameraConfig& cam, int u, int v);
/// Pixel whose center ray hits nearest to a world point, if it is in view.
std::optional<std::pair<double, double>> project_ground_point(const Pose& pose, const CameraConfig& cam, Vec2 p);

/// Renders with arbitrary ground and sky shaders. `ground(world_point)` and
/// `sky(azimuth, elevation)` return pre-gain intensities.
template <class Ground, class Sky>
Frame render_scene(const Pose& pose, const CameraConfig& cam, Ground&& ground, Sky&& sky, double light_gain) {
    Frame out(cam.width_px, cam.height_px);
    const double f = cam.focal_px();
    const double p = deg_to_rad(cam.pitch_down_deg);
    const double sp = std::sin(p), cp = std::cos(p);
    const Vec2 eye = pose.position + pose.forward() * cam.mount_forward_m;
    for (int v = 0; v < cam.height_px; ++v) {
        const double yc = (v + 0.5 - 0.5 * cam.height_px) / f;
        const double down = sp + yc * cp;
        for (int u = 0; u < cam.width_px; ++u) {
            const double xc = (u + 0.5 - 0.5 * cam.width_px) / f;
            double level;
            if (down > 0.0) {
                const double t = cam.mount_height_m / down;
                const Vec2 local{t * (cp - yc * sp), -t * xc};
                level = ground(eye + rotate(local, pose.heading));
            } else {
                const double fwd = cp - yc * sp;
                level = sky(pose.heading + std::atan2(-xc, fwd), std::atan2(-down, std::hypot(fwd, xc)));
            }
            out.at(u, v) = static_cast<std::uint8_t>(std::clamp(std::lround(level * light_gain), 0L, 255L));
        }
    }
    return out;
}

/// Forward camera frame: surface shading, background, light gain, speckle.
Frame render(const Pose& pose, const CameraConfig& cam, const Track& track, const EnvState& env, double time_s,
             std::uint64_t seq = 0);
/// The same frame before speckle.
Frame render_clean(const Pose& pose, const CameraConfig& cam, const Track& track, const EnvState& env);
/// Tinted three-channel variant (no speckle).
RgbFrame render_rgb(const Pose& pose, const CameraConfig& cam, const Track& track, const EnvState& env);

/// Raises a seeded fraction 0.02 * speckle_phase of pixels toward white.
Frame speckle(const Frame& frame, const EnvState& env);

/// Top-down orthographic map fit to the track bounds: corridor, markers,
/// the given coins and an arrow for the vehicle.
Frame render_minimap(const Track& track, const Pose& pose, int size_px, std::span<const Vec2> coins);

inline constexpr std::uint8_t kMinimapMarker = 255;
inline constexpr std::uint8_t kMinimapCorridor = 40;
inline constexpr std::uint8_t kMinimapCoin = 180;
inline constexpr std::uint8_t kMinimapVehicle = 120;

}  // namespace laneforge
