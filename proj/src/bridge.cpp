#include "laneforge/bridge.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>

#include <spdlog/spdlog.h>

#include "laneforge/datalog.hpp"
#include "laneforge/textutil.hpp"

namespace laneforge {

void AiCommand::validate() const {
    if (!std::isfinite(steer_deg) || !std::isfinite(velocity_mps)) throw std::invalid_argument("non-finite command");
    if (mode != 0 && mode != 1) throw std::invalid_argument("mode must be 0 or 1");
}

std::string format_ai_input(const AiCommand& cmd) {
    cmd.validate();
    return format_double(cmd.steer_deg) + "," + format_double(cmd.velocity_mps) + "," + std::to_string(cmd.mode) +
           "\n";
}

AiCommand parse_ai_input(std::string_view text) {
    if (!text.empty() && text.back() == '\n') text.remove_suffix(1);
    if (!text.empty() && text.back() == '\r') text.remove_suffix(1);
    if (text.find('\n') != std::string_view::npos) throw std::invalid_argument("AI.input holds more than one line");
    const auto fields = split(text, ',');
    if (fields.size() != 3) throw std::invalid_argument("AI.input needs three values");
    AiCommand cmd;
    cmd.steer_deg = parse_double(trim(fields[0]));
    cmd.velocity_mps = parse_double(trim(fields[1]));
    cmd.mode = int(parse_int(trim(fields[2])));
    cmd.validate();
    return cmd;
}

void write_ai_input(const std::filesystem::path& path, const AiCommand& cmd) {
    const std::string line = format_ai_input(cmd);
    std::filesystem::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
        if (!f) throw IoFailure("cannot open " + tmp.string());
        f.write(line.data(), std::streamsize(line.size()));
        if (!f) throw IoFailure("cannot write " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) throw IoFailure("cannot replace " + path.string() + ": " + ec.message());
}

AiCommand AiInputReader::read() {
    std::ifstream f(path_, std::ios::binary);
    if (!f) {
        ++warnings_;
        if (!missing_reported_) spdlog::warn("{} is missing; using the neutral command", path_.string());
        missing_reported_ = true;
        return AiCommand{};
    }
    missing_reported_ = false;
    std::ostringstream ss;
    ss << f.rdbuf();
    try {
        last_good_ = parse_ai_input(ss.str());
    } catch (const std::invalid_argument& e) {
        ++warnings_;
        spdlog::warn("ignoring bad {}: {}", path_.string(), e.what());
    }
    return last_good_;
}

ControlInput arbitrate(const ControlInput& human, const ControlInput& ai, DriveMode mode, double deadzone) {
    const ControlInput h = sanitize(human);
    if (mode == DriveMode::Human) return h;
    if (std::abs(h.steer_axis) > deadzone || h.throttle > deadzone || h.brake > deadzone) return h;
    return sanitize(ai);
}

ControlInput command_to_control(const AiCommand& cmd, const VehicleState& state, const VehicleParams& params,
                                double speed_gain) {
    ControlInput in;
    in.steer_axis = cmd.steer_deg / (steering_limit(params, state.speed) * params.steer_coeff_front);
    // Feed-forward cancels drag at the target speed.
    const double u = params.drag_per_s * cmd.velocity_mps / params.max_accel_mps2 +
                     speed_gain * (cmd.velocity_mps - state.speed);
    in.throttle = std::clamp(u, 0.0, 1.0);
    in.brake = u < 0.0 ? std::clamp(-u, 0.0, 1.0) : 0.0;
    return sanitize(in);
}

CameraConfig camera_for(const Options& options) {
    return CameraConfig::with_ratio(CameraConfig{}.height_px, options.width_ratio, options.vertical_fov_deg);
}

Frame capture_frame(const Session& session, const CameraConfig& cam, std::uint64_t seq) {
    return render(session.state().pose, cam, session.track(), session.env(), session.sim_time(), seq);
}

Frame model_frame(const Frame& raw, const PipelineConfig& pipeline, int width, int height) {
    Frame f = preprocess(raw, pipeline);
    if (f.width == width && f.height == height) return f;
    return resample_area(f, width, height);
}

// Headless generation

HeadlessResult run_headless(const SessionConfig& config, const std::filesystem::path& out_dir,
                            const HeadlessExtras& extras) {
    config.validate_headless();
    Track track = build_track(load_layout(config.track_path));
    const Options options = config.options_path.empty() ? Options{} : load_options(config.options_path);
    const SpawnSpec spawn = config.spawn_path.empty() ? SpawnSpec{} : load_spawn(config.spawn_path);
    const Pose start = track.spawn_pose(spawn.spawn_index, spawn.heading_deg);
    Session session(std::move(track), options, start, config.seed);
    return run_headless(session, config, out_dir, extras);
}

HeadlessResult run_headless(Session& session, const SessionConfig& config, const std::filesystem::path& out_dir,
                            const HeadlessExtras& extras) {
    config.validate_headless();
    if (config.mode != DriveMode::InGameAI) throw std::invalid_argument("headless runs drive with the in-game AI");
    extras.autopilot.validate();
    session.set_capture_enabled(config.capture_enabled);

    AsyncRunWriter writer(out_dir, extras.queue_capacity, QueuePolicy::Block);
    std::ostringstream meta;
    meta << "mode=" << to_string(config.mode) << "\nseed=" << config.seed << "\nsteer_noise="
         << format_double(extras.steer_noise) << "\ntrack=" << config.track_path.string() << "\n"
         << format_options(session.options());
    writer.write_meta(meta.str());

    const CameraConfig cam = camera_for(session.options());
    std::mt19937_64 rng(config.seed ^ 0x9e3779b97f4a7c15ULL);
    std::uniform_real_distribution<double> noise(-1.0, 1.0);
    const auto hold = std::max<std::uint64_t>(1, std::uint64_t(std::llround(extras.noise_hold_s / kPhysicsDt)));
    double offset = 0.0;

    const int laps0 = session.score().lap_count;
    const int collisions0 = session.score().collision_count;
    const double t0 = session.sim_time();
    HeadlessResult result;
    result.dir = out_dir;
    for (;;) {
        const double elapsed = session.sim_time() - t0;
        if (config.duration_s && elapsed >= *config.duration_s - 1e-9) break;
        if (config.lap_target && session.score().lap_count - laps0 >= *config.lap_target) break;
        if (config.lap_target && elapsed >= extras.lap_timeout_s) break;

        if (extras.steer_noise > 0.0 && session.ticks() % hold == 0) offset = extras.steer_noise * noise(rng);
        const VehicleState& st = session.state();
        ControlInput in = decide(sense(st.pose, session.track(), extras.autopilot), extras.autopilot, st.speed);
        in.steer_axis += offset;
        const TickResult tr = session.tick(in);
        if (!tr.log) continue;
        const LogEvent& ev = *tr.log;
        Frame frame = render(ev.state.pose, cam, session.track(), env_at(session.seed(), ev.sim_time_s), ev.sim_time_s,
                             ev.seq);
        Sample s{ev.timestamp_ms, ev.state.speed, ev.state.steer_deg, ev.throttle, frame_file_name(ev.seq)};
        writer.submit(std::move(s), std::move(frame));
        ++result.rows;
    }
    writer.close();
    if (writer.failed()) throw IoFailure("logging to " + out_dir.string() + " failed");
    result.frames = writer.written();
    result.collisions = session.score().collision_count - collisions0;
    result.laps = session.score().lap_count - laps0;
    result.sim_time_s = session.sim_time() - t0;
    return result;
}

// External model driving

void DriveConfig::validate() const {
    if (!(cadence_hz > 0.0)) throw std::invalid_argument("cadence must be positive");
    if (!(max_slew_deg_per_s > 0.0)) throw std::invalid_argument("slew rate must be positive");
    if (!std::isfinite(velocity_mps)) throw std::invalid_argument("velocity must be finite");
    if (transport == Transport::File && ai_input_path.empty()) throw std::invalid_argument("file transport needs a path");
    if (!duration_s && !lap_target) throw std::invalid_argument("set a duration or a lap target");
    pipeline.validate();
}

Pose recovery_pose(const Track& track, Vec2 p) {
    const Vec2 dir = track.travel_direction(p);
    const Vec2 left{-dir.y, dir.x};
    return {p - left * track.lateral_offset(p), std::atan2(dir.y, dir.x)};
}

double median(std::vector<double> v) { return percentile(std::move(v), 0.5); }

double percentile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const double pos = std::clamp(q, 0.0, 1.0) * double(v.size() - 1);
    const auto lo = std::size_t(std::floor(pos));
    const auto hi = std::min(v.size() - 1, lo + 1);
    return v[lo] + (v[hi] - v[lo]) * (pos - double(lo));
}

DriveStats external_drive_loop(Session& session, const SteerModel& model, const DriveConfig& config,
                               const FrameSource& frames, const HumanSource& human) {
    config.validate();
    const Shape in_shape = model.input_shape();
    const int depth = config.arch == Arch::Single ? 1 : 3;
    if (in_shape.d != depth || in_shape.c != 1) throw ShapeMismatch("model input does not match the architecture");

    using clock = std::chrono::steady_clock;
    const auto period_ticks =
        std::max<std::uint64_t>(1, std::uint64_t(std::llround(1.0 / (config.cadence_hz * kPhysicsDt))));
    const double period_s = double(period_ticks) * kPhysicsDt;
    const CameraConfig cam = camera_for(session.options());

    DriveStats stats;
    std::deque<Frame> history;
    AiCommand latest{0.0, config.velocity_mps, 1};
    std::optional<AiInputReader> reader;
    if (config.transport == Transport::File) {
        std::filesystem::remove(config.ai_input_path);
        reader.emplace(config.ai_input_path);
    }
    std::optional<std::uint64_t> command_tick;
    double prev_steer = 0.0;
    double slow_since = session.sim_time();

    const std::uint64_t tick0 = session.ticks();
    const double t0 = session.sim_time();
    const int laps0 = session.score().lap_count;
    const int collisions0 = session.score().collision_count;

    auto intervene = [&] {
        ++stats.interventions;
        stats.intervention_poses.push_back(session.state().pose);
        session.reset_vehicle(recovery_pose(session.track(), session.state().pose.position));
        slow_since = session.sim_time();
    };

    for (;;) {
        const double elapsed = session.sim_time() - t0;
        if (config.duration_s && elapsed >= *config.duration_s - 1e-9) break;
        if (config.lap_target && session.score().lap_count - laps0 >= *config.lap_target) break;
        if (elapsed >= config.timeout_s) break;

        const std::uint64_t t = session.ticks();
        if ((t - tick0) % period_ticks == 0) {
            const std::uint64_t cycle = stats.cycles++;
            std::optional<Frame> raw = frames ? frames(session, cycle) : capture_frame(session, cam, cycle);
            if (!raw) {
                ++stats.skipped_no_frame;
            } else {
                const auto t_img = clock::now();
                double pred = 0.0;
                try {
                    history.push_back(model_frame(*raw, config.pipeline, in_shape.w, in_shape.h));
                    while (history.size() > std::size_t(depth)) history.pop_front();
                    std::vector<const Frame*> stack;
                    // Until enough history exists the oldest frame is repeated.
                    for (int k = 0; k < depth; ++k) {
                        const int idx = int(history.size()) - depth + k;
                        stack.push_back(&history[std::size_t(std::max(0, idx))]);
                    }
                    pred = model.forward(frames_to_tensor(std::span<const Frame* const>(stack)));
                } catch (const ShapeMismatch& e) {
                    stats.error = e.what();
                    break;
                }
                prev_steer = slew_limit(prev_steer, pred, config.max_slew_deg_per_s, period_s);
                const AiCommand cmd{prev_steer, config.velocity_mps, 1};
                if (reader) {
                    write_ai_input(config.ai_input_path, cmd);
                } else {
                    latest = cmd;
                }
                const double ms = std::chrono::duration<double, std::milli>(clock::now() - t_img).count();
                stats.latencies_ms.push_back(ms);
                if (ms > period_s * 1000.0) ++stats.dropped_cycles;
                ++stats.commands_written;
                command_tick = t;
                stats.steer_commands_deg.push_back(prev_steer);
            }
            stats.trajectory.push_back(session.state().pose);
        }

        const AiCommand cmd = reader ? reader->read() : latest;
        if (!command_tick || t - *command_tick > 2 * period_ticks) ++stats.stale_ticks;
        const VehicleState& st = session.state();
        const ControlInput ai = command_to_control(cmd, st, session.options().vehicle);
        const ControlInput h = human ? human(session) : ControlInput{};
        const ControlInput applied = arbitrate(h, ai, DriveMode::ExternalAI);
        if (!(applied.steer_axis == sanitize(ai).steer_axis && applied.throttle == sanitize(ai).throttle &&
              applied.brake == sanitize(ai).brake)) {
            ++stats.human_ticks;
        }
        const TickResult tr = session.tick(applied);

        if (tr.lap == LapEvent::Forward && session.last_lap_s()) stats.lap_times_s.push_back(*session.last_lap_s());
        if (session.state().speed >= config.stuck_speed_mps) slow_since = session.sim_time();
        if (config.interventions && (tr.new_collision || session.sim_time() - slow_since >= config.stuck_s)) {
            intervene();
        }
    }

    stats.median_latency_ms = median(stats.latencies_ms);
    stats.p95_latency_ms = percentile(stats.latencies_ms, 0.95);
    stats.laps = session.score().lap_count - laps0;
    stats.collisions = session.score().collision_count - collisions0;
    stats.sim_time_s = session.sim_time() - t0;
    return stats;
}

}  // namespace laneforge
