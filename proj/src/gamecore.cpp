#include "laneforge/gamecore.hpp"

#include <cmath>
#include <stdexcept>

namespace laneforge {

std::string_view to_string(DriveMode mode) {
    switch (mode) {
        case DriveMode::Human: return "human";
        case DriveMode::InGameAI: return "ingame-ai";
        case DriveMode::ExternalAI: return "external-ai";
    }
    return "unknown";
}

DriveMode drive_mode_from_string(std::string_view name) {
    if (name == "human") return DriveMode::Human;
    if (name == "ingame-ai") return DriveMode::InGameAI;
    if (name == "external-ai") return DriveMode::ExternalAI;
    throw std::invalid_argument("unknown drive mode: " + std::string(name));
}

LapEvent lap_check(const Pose& prev, const Pose& pose, Segment gate, Vec2 gate_forward) {
    const double s0 = dot(prev.position - gate.a, gate_forward);
    const double s1 = dot(pose.position - gate.a, gate_forward);
    const bool forward = s0 < 0.0 && s1 >= 0.0;
    const bool backward = s0 >= 0.0 && s1 < 0.0;
    if (!forward && !backward) return LapEvent::None;
    if (!segment_crossing(prev.position, pose.position, gate.a, gate.b)) return LapEvent::None;
    return forward ? LapEvent::Forward : LapEvent::Backward;
}

bool capture_gate(double sim_time_s, std::optional<double> last_collision_s, bool disqualified,
                  const GameRules& rules) {
    if (disqualified) return false;
    return !last_collision_s || sim_time_s - *last_collision_s >= rules.collision_cooldown_s;
}

void SessionConfig::validate_headless() const {
    if (duration_s.has_value() == lap_target.has_value()) {
        throw std::invalid_argument("headless session needs exactly one of duration or lap target");
    }
    if (duration_s && !(*duration_s > 0.0)) throw std::invalid_argument("duration must be positive");
    if (lap_target && *lap_target <= 0) throw std::invalid_argument("lap target must be positive");
}

Session::Session(Track track, Options options, Pose start, std::uint64_t seed, GameRules rules)
    : track_(std::move(track)), options_(options), rules_(rules), seed_(seed) {
    options_.validate();
    state_.pose = start;
    coin_collected_.assign(track_.coins().size(), false);
}

bool Session::gate_open() const {
    return capture_gate(sim_time(), last_collision_s_, score_.disqualified, rules_);
}

std::vector<Vec2> Session::remaining_coins() const {
    std::vector<Vec2> out;
    for (std::size_t i = 0; i < coin_collected_.size(); ++i) {
        if (!coin_collected_[i]) out.push_back(track_.coins()[i].position);
    }
    return out;
}

std::optional<double> Session::last_lap_s() const {
    if (score_.lap_times.empty()) return std::nullopt;
    return score_.lap_times.back();
}

void Session::set_options(const Options& options) {
    options.validate();
    options_ = options;
}

void Session::reset_vehicle(const Pose& pose) {
    state_ = VehicleState{};
    state_.pose = pose;
}

TickResult Session::tick(const ControlInput& raw) {
    TickResult out;
    const ControlInput input = sanitize(raw);
    last_input_ = input;
    const VehicleState prev = state_;
    state_ = enforce_colliders(step(prev, input, options_.vehicle, kPhysicsDt), prev, track_, options_.vehicle);
    ++ticks_;
    const double now = sim_time();

    if (state_.collided && !prev.collided) {
        out.new_collision = true;
        ++score_.collision_count;
        last_collision_s_ = now;
    }
    for (std::size_t i = 0; i < coin_collected_.size(); ++i) {
        if (coin_collected_[i]) continue;
        const Vec2 c = track_.coins()[i].position;
        if (point_segment_distance(c, prev.pose.position, state_.pose.position) <= rules_.coin_radius_m) {
            coin_collected_[i] = true;
            ++score_.coins_collected;
            out.coin_collected = true;
        }
    }
    out.lap = lap_check(prev.pose, state_.pose, track_.gate(), track_.gate_forward());
    if (out.lap == LapEvent::Forward) {
        if (++net_crossings_ > score_.lap_count) {
            score_.lap_count = net_crossings_;
            score_.lap_times.push_back(now - lap_start_s_);
            lap_start_s_ = now;
        }
    } else if (out.lap == LapEvent::Backward) {
        --net_crossings_;
    }
    if (!score_.disqualified) {
        score_.score = long(score_.coins_collected) * rules_.coin_value -
                       long(score_.collision_count) * rules_.collision_penalty;
        if (score_.collision_count >= rules_.disqualify_at) score_.disqualified = true;
    }

    const auto clock = static_cast<std::uint64_t>(
        std::floor(double(ticks_) * options_.sampling_rate_hz * kPhysicsDt + 1e-9));
    if (clock != sample_clock_) {
        sample_clock_ = clock;
        out.sampled = true;
        if (capture_enabled_ && gate_open()) {
            LogEvent ev;
            ev.seq = sample_seq_++;
            ev.sim_time_s = now;
            ev.timestamp_ms = std::llround(now * 1000.0);
            ev.state = state_;
            ev.throttle = input.throttle - input.brake;
            out.log = ev;
        }
    }
    return out;
}

}  // namespace laneforge
