#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "laneforge/bridge.hpp"
#include "laneforge/gamecore.hpp"

namespace laneforge {

class PortBusy : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ProtocolError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// State broadcast to every client at the snapshot rate.
struct Snapshot {
    std::uint64_t seq = 0;
    double x = 0.0;
    double y = 0.0;
    double heading_deg = 0.0;
    double speed_mps = 0.0;
    double steer_deg = 0.0;
    long score = 0;
    int laps = 0;
    std::optional<double> last_lap_s;
    bool gate_open = false;
    DriveMode mode = DriveMode::Human;
};

Snapshot make_snapshot(const Session& session, DriveMode mode, std::uint64_t seq);
std::string snapshot_json(const Snapshot& s);
Snapshot parse_snapshot_json(std::string_view text);

enum class FrameKind : std::uint8_t { Preview = 1, Minimap = 2 };

/// `[kind][seq, u32 little-endian][PGM body]`
std::string encode_binary_frame(FrameKind kind, std::uint32_t seq, const Frame& frame);
struct BinaryFrame {
    FrameKind kind = FrameKind::Preview;
    std::uint32_t seq = 0;
    Frame frame;
};
BinaryFrame decode_binary_frame(std::string_view bytes);

struct InputMessage {
    ControlInput input;
};
struct OptionsMessage {
    std::vector<std::pair<std::string, std::string>> values;
};
struct SessionMessage {
    enum class Command : std::uint8_t { Reset, Mode } command = Command::Reset;
    DriveMode mode = DriveMode::Human;
};
using ClientMessage = std::variant<InputMessage, OptionsMessage, SessionMessage>;

/// Parses one text frame; throws ProtocolError.
ClientMessage parse_client_message(std::string_view text);
std::string format_client_message(const ClientMessage& msg);

struct ServerConfig {
    std::string address = "127.0.0.1";
    unsigned short port = 8700;  // 0 picks a free port
    double snapshot_hz = 30.0;
    int preview_width = 80;
    int preview_height = 60;
    int minimap_px = 128;
    /// Pace the simulation against the wall clock.
    bool realtime = true;
    DriveMode mode = DriveMode::Human;
    /// Watched for hot reload when set.
    std::filesystem::path options_path;
    /// External AI commands are read from here.
    std::filesystem::path ai_input_path;
    /// Sampled frames and telemetry are logged here when set.
    std::filesystem::path capture_dir;
    std::size_t inbound_capacity = 1024;
    std::size_t outbound_per_client = 64;
    AutopilotParams autopilot;
};

/// Websocket front end for one Session. The simulation runs on its own
/// thread and owns the Session; socket IO runs on another. They exchange
/// only queued immutable messages.
class GameServer {
public:
    GameServer(Session session, Pose reset_pose, ServerConfig config);
    ~GameServer();
    GameServer(const GameServer&) = delete;
    GameServer& operator=(const GameServer&) = delete;

    /// Binds and starts both threads. Throws PortBusy.
    void start();
    void stop();
    /// Blocks until stop() is called from another thread or a signal.
    void wait();

    unsigned short port() const { return bound_port_.load(); }
    std::uint64_t snapshots_sent() const { return snapshots_.load(); }

    struct Impl;

private:
    std::unique_ptr<Impl> impl_;
    std::atomic<unsigned short> bound_port_{0};
    std::atomic<std::uint64_t> snapshots_{0};
};

}  // namespace laneforge
