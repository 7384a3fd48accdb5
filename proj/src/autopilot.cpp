#include "laneforge/autopilot.hpp"

#include <algorithm>
#include <cmath>

namespace laneforge {

void AutopilotParams::validate() const {
    if (!(side_angle_deg > 0.0 && side_angle_deg < 90.0)) throw std::invalid_argument("side angle must be in (0, 90)");
    if (!(brake_distance_m < max_range_m)) throw std::invalid_argument("brake distance must be below max range");
    if (!(center_gain > 0.0)) throw std::invalid_argument("center gain must be positive");
    if (!(cruise_throttle >= 0.0 && cruise_throttle <= 1.0 && slow_throttle >= 0.0 && slow_throttle <= 1.0)) {
        throw std::invalid_argument("throttles must be in [0, 1]");
    }
}

RangeReadings sense(const Pose& pose, const Track& track, const AutopilotParams& params) {
    const Vec2 origin = pose.position + pose.forward() * params.sensor_forward_m;
    const double side = deg_to_rad(params.side_angle_deg);
    auto cast = [&](double offset) {
        return track.raycast_collider(origin, unit_from_angle(pose.heading + offset), params.max_range_m);
    };
    return {cast(0.0), cast(side), cast(-side)};
}

ControlInput decide(const RangeReadings& r, const AutopilotParams& params, double /*speed*/) {
    const double sum = r.left + r.right;
    if (!(sum > 0.0)) throw DegenerateSense("left and right ranges are both zero");
    // Positive when the right side is more open; steering right is positive.
    const double imbalance = (r.right - r.left) / sum;

    ControlInput out;
    // Front strictly longest: hold the lane center. Otherwise the same law
    // pulls toward the longer side and saturates at full lock.
    out.steer_axis = std::clamp(params.center_gain * imbalance, -1.0, 1.0);
    out.throttle = r.front >= params.brake_distance_m ? params.cruise_throttle : params.slow_throttle;
    out.brake = 0.0;
    return sanitize(out);
}

}  // namespace laneforge
