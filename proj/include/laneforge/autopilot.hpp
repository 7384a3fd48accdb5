#pragma once

#include <stdexcept>

#include "laneforge/dynamics.hpp"
#include "laneforge/trackkit.hpp"

namespace laneforge {

struct AutopilotParams {
    double side_angle_deg = 60.0;
    double max_range_m = 0.5;
    double brake_distance_m = 0.4;
    double center_gain = 3.0;
    double cruise_throttle = 0.12;
    double slow_throttle = 0.07;
    /// Raycast origin ahead of the vehicle reference point.
    double sensor_forward_m = 0.0;

    void validate() const;
};

struct RangeReadings {
    double front = 0.0;
    double left = 0.0;
    double right = 0.0;
};

class DegenerateSense : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Three collider raycasts at headings 0, +side_angle (left), -side_angle (right).
RangeReadings sense(const Pose& pose, const Track& track, const AutopilotParams& params);

/// Proportional centering on the left/right imbalance; positive steer = right.
ControlInput decide(const RangeReadings& r, const AutopilotParams& params, double speed);

}  // namespace laneforge
