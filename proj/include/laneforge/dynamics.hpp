#pragma once

#include "laneforge/geometry.hpp"
#include "laneforge/trackkit.hpp"

namespace laneforge {

/// Kinematic single-track vehicle parameters. Angles in degrees, speeds in
/// m/s, accelerations in m/s^2.
struct VehicleParams {
    double low_speed_steer_deg = 30.0;
    double high_speed_steer_deg = 12.0;
    double crossover_speed_mps = 5.0;
    double steer_coeff_front = 1.0;
    double steer_coeff_rear = 0.0;
    double fwd_slip_threshold = 12.0;
    double side_slip_threshold = 20.0;
    double speed_limit_mps = 8.0;
    double wheelbase_m = 0.16;
    double width_m = 0.30;
    double max_accel_mps2 = 4.0;
    double max_brake_mps2 = 8.0;
    /// Linear rolling drag (1/s). With the defaults, full throttle settles
    /// exactly at the speed limit.
    double drag_per_s = 0.5;

    /// Throws std::invalid_argument on a violated invariant.
    void validate() const;
};

struct VehicleState {
    Pose pose;
    double speed = 0.0;     // m/s, >= 0
    double steer_deg = 0.0;  // actual front-wheel angle; positive = right
    bool collided = false;

    bool operator==(const VehicleState& o) const {
        return pose.position == o.pose.position && pose.heading == o.pose.heading && speed == o.speed &&
               steer_deg == o.steer_deg && collided == o.collided;
    }
};

struct ControlInput {
    double steer_axis = 0.0;  // [-1, 1], positive = right
    double throttle = 0.0;    // [0, 1]
    double brake = 0.0;       // [0, 1]

    bool operator==(const ControlInput&) const = default;
};

/// Clamps every axis into its valid range; NaN becomes 0.
ControlInput sanitize(ControlInput in);

inline constexpr double kPhysicsDt = 1.0 / 240.0;

/// Hard switch at the crossover speed; the boundary belongs to high-speed mode.
double steering_limit(const VehicleParams& params, double speed);

/// One explicit integration step of length dt (0 < dt <= 0.1).
VehicleState step(const VehicleState& state, const ControlInput& input, const VehicleParams& params, double dt);

/// Endpoints of the lateral footprint (left, right) at a pose.
Segment footprint(const Pose& pose, const VehicleParams& params);

/// Footprint closer than this to a collider counts as touching.
inline constexpr double kContactTolerance = 1e-7;

/// Stops the vehicle at the first collider contact along the motion
/// prev -> state. `prev` must not penetrate a collider.
VehicleState enforce_colliders(const VehicleState& state, const VehicleState& prev, const Track& track,
                               const VehicleParams& params);

}  // namespace laneforge
