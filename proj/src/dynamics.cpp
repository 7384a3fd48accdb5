#include "laneforge/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace laneforge {
namespace {

double clamp_axis(double v, double lo, double hi) {
    if (std::isnan(v)) return 0.0;
    return std::clamp(v, lo, hi);
}

double wrap_angle(double a) {
    a = std::fmod(a + kPi, 2.0 * kPi);
    if (a < 0.0) a += 2.0 * kPi;
    return a - kPi;
}

// Footprints closer than this to a collider are backed off to it.
constexpr double kStandoff = 1e-9;

Pose interpolate(const Pose& a, const Pose& b, double t) {
    return {a.position + (b.position - a.position) * t, a.heading + wrap_angle(b.heading - a.heading) * t};
}

}  // namespace

void VehicleParams::validate() const {
    if (!(low_speed_steer_deg >= high_speed_steer_deg && high_speed_steer_deg > 0.0)) {
        throw std::invalid_argument("steering limits must satisfy low >= high > 0");
    }
    if (!(crossover_speed_mps > 0.0)) throw std::invalid_argument("crossover speed must be positive");
    if (!(speed_limit_mps > 0.0)) throw std::invalid_argument("speed limit must be positive");
    if (!(wheelbase_m > 0.0)) throw std::invalid_argument("wheelbase must be positive");
    if (!(width_m > 0.0)) throw std::invalid_argument("width must be positive");
    if (!(fwd_slip_threshold > 0.0 && side_slip_threshold > 0.0)) {
        throw std::invalid_argument("slip thresholds must be positive");
    }
    if (!(drag_per_s >= 0.0)) throw std::invalid_argument("drag must be non-negative");
}

ControlInput sanitize(ControlInput in) {
    return {clamp_axis(in.steer_axis, -1.0, 1.0), clamp_axis(in.throttle, 0.0, 1.0), clamp_axis(in.brake, 0.0, 1.0)};
}

double steering_limit(const VehicleParams& params, double speed) {
    return speed < params.crossover_speed_mps ? params.low_speed_steer_deg : params.high_speed_steer_deg;
}

VehicleState step(const VehicleState& state, const ControlInput& raw, const VehicleParams& params, double dt) {
    const ControlInput in = sanitize(raw);
    const double v0 = state.speed;

    double accel = in.throttle * params.max_accel_mps2 - in.brake * params.max_brake_mps2 - params.drag_per_s * v0;
    accel = std::clamp(accel, -params.fwd_slip_threshold, params.fwd_slip_threshold);
    const double v1 = std::clamp(v0 + accel * dt, 0.0, params.speed_limit_mps);

    const double limit = std::min(steering_limit(params, v0), steering_limit(params, v1));
    double steer = std::clamp(in.steer_axis * steering_limit(params, v0) * params.steer_coeff_front, -limit, limit);

    const double yaw_gain = 1.0 - params.steer_coeff_rear;
    double rate = -v0 * std::tan(deg_to_rad(steer) * yaw_gain) / params.wheelbase_m;
    if (std::abs(v0 * rate) > params.side_slip_threshold) {
        // Scale steering authority back so lateral acceleration sits at the threshold.
        const double eff = std::atan(params.side_slip_threshold * params.wheelbase_m / (v0 * v0));
        steer = std::copysign(rad_to_deg(eff) / yaw_gain, steer);
        rate = -v0 * std::tan(deg_to_rad(steer) * yaw_gain) / params.wheelbase_m;
    }

    VehicleState out = state;
    const double th0 = state.pose.heading;
    const double dth = rate * dt;
    if (std::abs(dth) < 1e-12) {
        out.pose.position = state.pose.position + unit_from_angle(th0) * (v0 * dt);
    } else {
        const double r = v0 / rate;
        out.pose.position = state.pose.position +
                            Vec2{r * (std::sin(th0 + dth) - std::sin(th0)), r * (std::cos(th0) - std::cos(th0 + dth))};
    }
    out.pose.heading = wrap_angle(th0 + dth);
    out.speed = v1;
    out.steer_deg = steer;
    out.collided = false;
    return out;
}

Segment footprint(const Pose& pose, const VehicleParams& params) {
    const Vec2 half = pose.left() * (0.5 * params.width_m);
    return {pose.position + half, pose.position - half};
}

VehicleState enforce_colliders(const VehicleState& state, const VehicleState& prev, const Track& track,
                               const VehicleParams& params) {
    const Segment f0 = footprint(prev.pose, params);
    const double prev_clearance = track.collider_clearance(f0.a, f0.b);

    auto pose_at = [&](double t) { return t == 1.0 ? state.pose : interpolate(prev.pose, state.pose, t); };
    auto blocked = [&](double t) {
        const Pose p = pose_at(t);
        const Segment f = footprint(p, params);
        if (track.first_collider_crossing(f0.a, f.a) || track.first_collider_crossing(f0.b, f.b) ||
            track.first_collider_crossing(prev.pose.position, p.position)) {
            return true;
        }
        const double c = track.collider_clearance(f.a, f.b);
        return c < kStandoff && c < prev_clearance;
    };

    VehicleState out = state;
    if (!blocked(1.0)) {
        const Segment f = footprint(state.pose, params);
        out.collided = track.collider_clearance(f.a, f.b) <= kContactTolerance;
        return out;
    }
    double lo = 0.0, hi = 1.0;
    for (int i = 0; i < 60; ++i) {
        const double mid = 0.5 * (lo + hi);
        (blocked(mid) ? hi : lo) = mid;
    }
    out.pose = pose_at(lo);
    if (std::abs(out.pose.heading) > kPi) out.pose.heading = wrap_angle(out.pose.heading);
    out.speed = 0.0;
    out.collided = true;
    return out;
}

}  // namespace laneforge
