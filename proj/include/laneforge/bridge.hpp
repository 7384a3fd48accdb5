#pragma once

#include <cstdint>
#include <deque>
#include <functional>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "laneforge/autopilot.hpp"
#include "laneforge/gamecore.hpp"
#include "laneforge/lanevision.hpp"
#include "laneforge/steernet.hpp"

namespace laneforge {

/// The three values exchanged through AI.input.
struct AiCommand {
    double steer_deg = 0.0;
    double velocity_mps = 0.0;
    int mode = 0;  // 0 in-game AI, 1 external

    void validate() const;
    bool operator==(const AiCommand&) const = default;
};

class IoFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// `steer_deg,velocity,mode\n`
std::string format_ai_input(const AiCommand& cmd);
/// Throws std::invalid_argument on anything but one well-formed line.
AiCommand parse_ai_input(std::string_view text);

/// Replaces the file through a temporary sibling and a rename.
void write_ai_input(const std::filesystem::path& path, const AiCommand& cmd);

/// Polling reader that keeps the last good command across bad reads.
class AiInputReader {
public:
    explicit AiInputReader(std::filesystem::path path) : path_(std::move(path)) {}

    /// Parsed command; the last good one on a parse failure; neutral when
    /// the file is missing. Both fallbacks log a warning and count it.
    AiCommand read();

    std::size_t warnings() const { return warnings_; }
    const AiCommand& last_good() const { return last_good_; }

private:
    std::filesystem::path path_;
    AiCommand last_good_;
    std::size_t warnings_ = 0;
    bool missing_reported_ = false;
};

inline constexpr double kDefaultDeadzone = 0.05;

/// Human input wins outright when any axis exceeds the deadzone or the mode
/// is Human; otherwise the AI input passes through.
ControlInput arbitrate(const ControlInput& human, const ControlInput& ai, DriveMode mode,
                       double deadzone = kDefaultDeadzone);

/// Steering angle to axis at the current speed, and a proportional
/// velocity loop to throttle or brake.
ControlInput command_to_control(const AiCommand& cmd, const VehicleState& state, const VehicleParams& params,
                                double speed_gain = 2.0);

CameraConfig camera_for(const Options& options);

/// Frame rendered for the vehicle's current pose and the session's clock.
Frame capture_frame(const Session& session, const CameraConfig& cam, std::uint64_t seq);

/// Preprocessed and downsampled model input for one rendered frame.
Frame model_frame(const Frame& raw, const PipelineConfig& pipeline, int width = kModelWidth,
                  int height = kModelHeight);

// Headless generation

struct HeadlessExtras {
    AutopilotParams autopilot;
    /// Additive steer-axis offset drawn uniformly in +-this, held for
    /// `noise_hold_s`. Zero gives the clean autopilot.
    double steer_noise = 0.0;
    double noise_hold_s = 0.5;
    std::size_t queue_capacity = 256;
    /// Hard cap on simulated time when running to a lap target.
    double lap_timeout_s = 600.0;
};

struct HeadlessResult {
    std::filesystem::path dir;
    std::size_t rows = 0;
    std::size_t frames = 0;
    int collisions = 0;
    int laps = 0;
    double sim_time_s = 0.0;
};

/// Loads track, options and spawn from the config paths and runs the
/// in-game AI without a clock, logging into `out_dir`.
HeadlessResult run_headless(const SessionConfig& config, const std::filesystem::path& out_dir,
                            const HeadlessExtras& extras = {});
/// Same loop on already loaded inputs.
HeadlessResult run_headless(Session& session, const SessionConfig& config, const std::filesystem::path& out_dir,
                            const HeadlessExtras& extras = {});

// External model driving

enum class Transport : std::uint8_t { InProcess, File };

struct DriveConfig {
    Arch arch = Arch::Single;
    double cadence_hz = 30.0;
    double velocity_mps = 0.8;
    double max_slew_deg_per_s = 600.0;
    Transport transport = Transport::InProcess;
    std::filesystem::path ai_input_path;
    std::optional<double> duration_s;
    std::optional<int> lap_target;
    double timeout_s = 600.0;
    PipelineConfig pipeline;
    /// A new collision, or a vehicle slower than `stuck_speed_mps` for
    /// `stuck_s`, puts the vehicle back on the nearest centerline point
    /// facing the direction of travel. Each reset is one intervention.
    bool interventions = true;
    double stuck_speed_mps = 0.02;
    double stuck_s = 2.0;

    void validate() const;
};

struct DriveStats {
    std::size_t cycles = 0;
    std::size_t commands_written = 0;
    std::size_t skipped_no_frame = 0;
    /// Cycles whose image-to-command latency exceeded one control period.
    std::size_t dropped_cycles = 0;
    /// Ticks that consumed a command older than two control periods.
    std::size_t stale_ticks = 0;
    std::size_t human_ticks = 0;
    std::vector<Pose> intervention_poses;
    std::vector<double> latencies_ms;
    double median_latency_ms = 0.0;
    double p95_latency_ms = 0.0;
    int laps = 0;
    int collisions = 0;
    int interventions = 0;
    double sim_time_s = 0.0;
    std::vector<double> lap_times_s;
    std::vector<double> steer_commands_deg;
    std::vector<Pose> trajectory;  // one pose per control cycle
    std::string error;             // set when a model error aborted the run
};

/// Supplies the frame for the current cycle; returning nothing means no
/// new image is ready.
using FrameSource = std::function<std::optional<Frame>(const Session&, std::uint64_t cycle)>;

/// Optional human channel polled every tick (zero input means released).
using HumanSource = std::function<ControlInput(const Session&)>;

/// Pose on the centerline nearest to p, heading along the direction of travel.
Pose recovery_pose(const Track& track, Vec2 p);

DriveStats external_drive_loop(Session& session, const SteerModel& model, const DriveConfig& config,
                               const FrameSource& frames = {}, const HumanSource& human = {});

double median(std::vector<double> v);
double percentile(std::vector<double> v, double q);

}  // namespace laneforge
