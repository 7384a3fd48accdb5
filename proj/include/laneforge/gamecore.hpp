#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "laneforge/dynamics.hpp"
#include "laneforge/options.hpp"
#include "laneforge/synthcam.hpp"
#include "laneforge/trackkit.hpp"

namespace laneforge {

enum class DriveMode : std::uint8_t { Human, InGameAI, ExternalAI };

std::string_view to_string(DriveMode mode);
DriveMode drive_mode_from_string(std::string_view name);

struct GameRules {
    int coin_value = 10;
    int collision_penalty = 50;
    double coin_radius_m = 0.15;
    double collision_cooldown_s = 1.0;
    int disqualify_at = 10;
};

struct ScoreState {
    int coins_collected = 0;
    int collision_count = 0;
    int lap_count = 0;
    std::vector<double> lap_times;
    long score = 0;
    bool disqualified = false;
};

enum class LapEvent : std::uint8_t { None, Forward, Backward };

/// Gate crossing of the motion prev -> pose. Starting exactly on the gate
/// line counts as not yet crossed.
LapEvent lap_check(const Pose& prev, const Pose& pose, Segment gate, Vec2 gate_forward);

/// Capture is open unless disqualified or inside the cooldown after the
/// most recent collision.
bool capture_gate(double sim_time_s, std::optional<double> last_collision_s, bool disqualified,
                  const GameRules& rules);

struct SessionConfig {
    DriveMode mode = DriveMode::InGameAI;
    std::filesystem::path track_path;
    std::filesystem::path options_path;
    std::filesystem::path spawn_path;
    std::optional<double> duration_s;
    std::optional<int> lap_target;
    bool capture_enabled = true;
    std::uint64_t seed = 0;

    /// Headless runs need exactly one of duration or lap target.
    void validate_headless() const;
};

/// One sampling-clock firing while capture was open.
struct LogEvent {
    std::uint64_t seq = 0;
    std::int64_t timestamp_ms = 0;
    double sim_time_s = 0.0;
    VehicleState state;
    double throttle = 0.0;  // throttle minus brake
};

struct TickResult {
    bool sampled = false;  // the sampling clock fired
    std::optional<LogEvent> log;
    bool new_collision = false;
    bool coin_collected = false;
    LapEvent lap = LapEvent::None;
};

/// Fixed-step game loop state. Single owner; not thread safe.
class Session {
public:
    Session(Track track, Options options, Pose start, std::uint64_t seed, GameRules rules = {});

    /// Advances one physics step of kPhysicsDt with an already arbitrated input.
    TickResult tick(const ControlInput& input);

    const Track& track() const { return track_; }
    const Options& options() const { return options_; }
    const GameRules& rules() const { return rules_; }
    const VehicleState& state() const { return state_; }
    const ScoreState& score() const { return score_; }
    const ControlInput& last_input() const { return last_input_; }
    EnvState env() const { return env_at(seed_, sim_time()); }
    std::uint64_t seed() const { return seed_; }
    std::uint64_t ticks() const { return ticks_; }
    double sim_time() const { return double(ticks_) * kPhysicsDt; }
    bool gate_open() const;
    bool capture_enabled() const { return capture_enabled_; }
    void set_capture_enabled(bool on) { capture_enabled_ = on; }
    std::uint64_t samples_emitted() const { return sample_seq_; }
    const std::vector<bool>& coin_collected() const { return coin_collected_; }
    std::vector<Vec2> remaining_coins() const;
    std::optional<double> last_lap_s() const;

    /// Hot reload; takes effect on the next tick.
    void set_options(const Options& options);
    /// Puts the vehicle back at rest; counters and clocks keep running.
    void reset_vehicle(const Pose& pose);

private:
    Track track_;
    Options options_;
    GameRules rules_;
    std::uint64_t seed_;
    VehicleState state_;
    ControlInput last_input_;
    ScoreState score_;
    std::vector<bool> coin_collected_;
    std::uint64_t ticks_ = 0;
    std::uint64_t sample_seq_ = 0;
    std::uint64_t sample_clock_ = 0;
    std::optional<double> last_collision_s_;
    double lap_start_s_ = 0.0;
    int net_crossings_ = 0;
    bool capture_enabled_ = true;
};

}  // namespace laneforge
