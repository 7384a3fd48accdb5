#include "laneforge/server.hpp"

#include <chrono>
#include <condition_variable>
#include <csignal>
#include <deque>
#include <map>
#include <mutex>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/post.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "laneforge/datalog.hpp"
#include "laneforge/textutil.hpp"

namespace laneforge {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using json = nlohmann::json;

// Protocol

Snapshot make_snapshot(const Session& session, DriveMode mode, std::uint64_t seq) {
    const VehicleState& st = session.state();
    Snapshot s;
    s.seq = seq;
    s.x = st.pose.position.x;
    s.y = st.pose.position.y;
    s.heading_deg = rad_to_deg(st.pose.heading);
    s.speed_mps = st.speed;
    s.steer_deg = st.steer_deg;
    s.score = session.score().score;
    s.laps = session.score().lap_count;
    s.last_lap_s = session.last_lap_s();
    s.gate_open = session.gate_open();
    s.mode = mode;
    return s;
}

std::string snapshot_json(const Snapshot& s) {
    json j = {{"type", "snapshot"},
              {"seq", s.seq},
              {"x", s.x},
              {"y", s.y},
              {"heading_deg", s.heading_deg},
              {"speed_mps", s.speed_mps},
              {"steer_deg", s.steer_deg},
              {"score", s.score},
              {"laps", s.laps},
              {"last_lap_s", s.last_lap_s ? json(*s.last_lap_s) : json(nullptr)},
              {"gate_open", s.gate_open},
              {"mode", std::string(to_string(s.mode))}};
    return j.dump();
}

Snapshot parse_snapshot_json(std::string_view text) {
    try {
        const json j = json::parse(text);
        if (j.at("type") != "snapshot") throw ProtocolError("not a snapshot");
        Snapshot s;
        s.seq = j.at("seq").get<std::uint64_t>();
        s.x = j.at("x").get<double>();
        s.y = j.at("y").get<double>();
        s.heading_deg = j.at("heading_deg").get<double>();
        s.speed_mps = j.at("speed_mps").get<double>();
        s.steer_deg = j.at("steer_deg").get<double>();
        s.score = j.at("score").get<long>();
        s.laps = j.at("laps").get<int>();
        if (!j.at("last_lap_s").is_null()) s.last_lap_s = j.at("last_lap_s").get<double>();
        s.gate_open = j.at("gate_open").get<bool>();
        s.mode = drive_mode_from_string(j.at("mode").get<std::string>());
        return s;
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("bad snapshot: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ProtocolError(std::string("bad snapshot: ") + e.what());
    }
}

std::string encode_binary_frame(FrameKind kind, std::uint32_t seq, const Frame& frame) {
    std::string out;
    out.push_back(char(kind));
    for (int k = 0; k < 4; ++k) out.push_back(char((seq >> (8 * k)) & 0xff));
    out += encode_pgm(frame);
    return out;
}

BinaryFrame decode_binary_frame(std::string_view bytes) {
    if (bytes.size() < 5) throw ProtocolError("binary frame too short");
    BinaryFrame b;
    const auto kind = std::uint8_t(bytes[0]);
    if (kind != 1 && kind != 2) throw ProtocolError("unknown binary frame kind");
    b.kind = FrameKind(kind);
    for (int k = 0; k < 4; ++k) b.seq |= std::uint32_t(std::uint8_t(bytes[std::size_t(1 + k)])) << (8 * k);
    try {
        b.frame = decode_pgm(bytes.substr(5));
    } catch (const std::exception& e) {
        throw ProtocolError(std::string("bad frame payload: ") + e.what());
    }
    return b;
}

namespace {

double number_field(const json& j, const char* key) {
    if (!j.contains(key)) return 0.0;
    const json& v = j.at(key);
    if (!v.is_number()) throw ProtocolError(std::string(key) + " must be a number");
    return v.get<double>();
}

}  // namespace

ClientMessage parse_client_message(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw ProtocolError(std::string("not JSON: ") + e.what());
    }
    if (!j.is_object() || !j.contains("type") || !j.at("type").is_string()) {
        throw ProtocolError("message needs a string type");
    }
    const std::string type = j.at("type").get<std::string>();
    if (type == "input") {
        InputMessage m;
        m.input.steer_axis = number_field(j, "steer");
        m.input.throttle = number_field(j, "throttle");
        m.input.brake = number_field(j, "brake");
        return m;
    }
    if (type == "options") {
        OptionsMessage m;
        if (j.contains("values")) {
            const json& v = j.at("values");
            if (!v.is_object()) throw ProtocolError("options values must be an object");
            for (const auto& [k, val] : v.items()) {
                if (val.is_number()) {
                    m.values.emplace_back(k, format_double(val.get<double>()));
                } else if (val.is_string()) {
                    m.values.emplace_back(k, val.get<std::string>());
                } else {
                    throw ProtocolError("option " + k + " must be a number or string");
                }
            }
        }
        if (j.contains("text")) {
            if (!j.at("text").is_string()) throw ProtocolError("options text must be a string");
            const std::string t = j.at("text").get<std::string>();
            for (auto line : split_lines(t)) {
                line = trim(strip_comment(line));
                if (line.empty()) continue;
                const auto eq = line.find('=');
                if (eq == std::string_view::npos) throw ProtocolError("options line needs key=value");
                m.values.emplace_back(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
            }
        }
        return m;
    }
    if (type == "session") {
        if (!j.contains("command") || !j.at("command").is_string()) throw ProtocolError("session needs a command");
        const std::string cmd = j.at("command").get<std::string>();
        SessionMessage m;
        if (cmd == "reset") {
            m.command = SessionMessage::Command::Reset;
        } else if (cmd == "mode") {
            m.command = SessionMessage::Command::Mode;
            if (!j.contains("mode") || !j.at("mode").is_string()) throw ProtocolError("mode command needs a mode");
            try {
                m.mode = drive_mode_from_string(j.at("mode").get<std::string>());
            } catch (const std::invalid_argument& e) {
                throw ProtocolError(e.what());
            }
        } else {
            throw ProtocolError("unknown session command " + cmd);
        }
        return m;
    }
    throw ProtocolError("unknown message type " + type);
}

std::string format_client_message(const ClientMessage& msg) {
    json j;
    if (const auto* in = std::get_if<InputMessage>(&msg)) {
        j = {{"type", "input"},
             {"steer", in->input.steer_axis},
             {"throttle", in->input.throttle},
             {"brake", in->input.brake}};
    } else if (const auto* op = std::get_if<OptionsMessage>(&msg)) {
        json values = json::object();
        for (const auto& [k, v] : op->values) values[k] = v;
        j = {{"type", "options"}, {"values", values}};
    } else {
        const auto& s = std::get<SessionMessage>(msg);
        j = {{"type", "session"}, {"command", s.command == SessionMessage::Command::Reset ? "reset" : "mode"}};
        if (s.command == SessionMessage::Command::Mode) j["mode"] = std::string(to_string(s.mode));
    }
    return j.dump();
}

// Server

namespace {

struct Inbound {
    enum class Kind : std::uint8_t { Join, Leave, Text } kind = Kind::Text;
    std::uint64_t client = 0;
    std::string text;
};

struct Outbound {
    bool binary = false;
    std::shared_ptr<const std::string> data;
};

}  // namespace

class WsClient;

struct GameServer::Impl {
    Impl(GameServer& o, Session s, Pose reset, ServerConfig c)
        : owner(o),
          session(std::move(s)),
          reset_pose(reset),
          cfg(std::move(c)),
          acceptor(ioc),
          signals(ioc),
          inbound(cfg.inbound_capacity, QueuePolicy::DropNewest),
          mode(cfg.mode) {}

    void do_accept();
    void sim_loop();
    void handle(const Inbound& in);
    void apply_message(std::uint64_t client, const ClientMessage& msg);
    void broadcast(std::vector<Outbound> msgs);
    void send_to(std::uint64_t client, Outbound msg);
    void hello(std::uint64_t client, bool driver);
    void request_stop();

    GameServer& owner;
    Session session;
    Pose reset_pose;
    ServerConfig cfg;

    asio::io_context ioc;
    tcp::acceptor acceptor;
    asio::signal_set signals;
    std::thread io_thread;
    std::thread sim_thread;
    std::atomic<bool> running{false};
    BoundedQueue<Inbound> inbound;

    std::mutex stop_mu;
    std::condition_variable stop_cv;
    bool stop_requested = false;

    // IO thread only.
    std::map<std::uint64_t, std::shared_ptr<WsClient>> clients;
    std::uint64_t next_client = 1;

    // Simulation thread only.
    std::optional<std::uint64_t> driver;
    std::vector<std::uint64_t> seated;  // join order
    ControlInput human{};
    DriveMode mode;
    std::uint64_t snapshot_seq = 0;
};

class WsClient : public std::enable_shared_from_this<WsClient> {
public:
    WsClient(tcp::socket socket, GameServer::Impl& impl, std::uint64_t id)
        : ws_(std::move(socket)), impl_(impl), id_(id) {}

    void start() {
        ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
        ws_.async_accept(beast::bind_front_handler(&WsClient::on_accept, shared_from_this()));
    }

    void send(Outbound msg) {
        if (closed_) return;
        // Drop the oldest queued message that is not in flight.
        if (queue_.size() >= impl_.cfg.outbound_per_client && queue_.size() > 1) queue_.erase(queue_.begin() + 1);
        queue_.push_back(std::move(msg));
        if (queue_.size() == 1) do_write();
    }

    void shutdown() {
        if (closed_) return;
        beast::error_code ec;
        beast::get_lowest_layer(ws_).socket().close(ec);
        mark_closed();
    }

private:
    void on_accept(beast::error_code ec) {
        if (ec) return;
        impl_.clients[id_] = shared_from_this();
        impl_.inbound.push({Inbound::Kind::Join, id_, {}});
        do_read();
    }

    void do_read() { ws_.async_read(buf_, beast::bind_front_handler(&WsClient::on_read, shared_from_this())); }

    void on_read(beast::error_code ec, std::size_t) {
        if (ec) {
            mark_closed();
            return;
        }
        if (ws_.got_text()) impl_.inbound.push({Inbound::Kind::Text, id_, beast::buffers_to_string(buf_.data())});
        buf_.consume(buf_.size());
        do_read();
    }

    void do_write() {
        ws_.binary(queue_.front().binary);
        ws_.async_write(asio::buffer(*queue_.front().data),
                        beast::bind_front_handler(&WsClient::on_write, shared_from_this()));
    }

    void on_write(beast::error_code ec, std::size_t) {
        if (ec) {
            mark_closed();
            return;
        }
        queue_.pop_front();
        if (!queue_.empty()) do_write();
    }

    void mark_closed() {
        if (closed_) return;
        closed_ = true;
        queue_.clear();
        if (impl_.clients.erase(id_) > 0) impl_.inbound.push({Inbound::Kind::Leave, id_, {}});
    }

    websocket::stream<beast::tcp_stream> ws_;
    beast::flat_buffer buf_;
    std::deque<Outbound> queue_;
    GameServer::Impl& impl_;
    std::uint64_t id_;
    bool closed_ = false;
};

void GameServer::Impl::do_accept() {
    acceptor.async_accept([this](beast::error_code ec, tcp::socket socket) {
        if (ec) {
            if (ec != asio::error::operation_aborted) spdlog::warn("accept failed: {}", ec.message());
            if (!acceptor.is_open()) return;
        } else {
            std::make_shared<WsClient>(std::move(socket), *this, next_client++)->start();
        }
        do_accept();
    });
}

void GameServer::Impl::broadcast(std::vector<Outbound> msgs) {
    asio::post(ioc, [this, msgs = std::move(msgs)] {
        const auto snapshot = clients;
        for (const auto& [id, c] : snapshot) {
            for (const auto& m : msgs) c->send(m);
        }
    });
}

void GameServer::Impl::send_to(std::uint64_t client, Outbound msg) {
    asio::post(ioc, [this, client, msg = std::move(msg)] {
        auto it = clients.find(client);
        if (it != clients.end()) it->second->send(msg);
    });
}

void GameServer::Impl::hello(std::uint64_t client, bool is_driver) {
    const json j = {{"type", "hello"}, {"client", client}, {"role", is_driver ? "driver" : "spectator"}};
    send_to(client, {false, std::make_shared<const std::string>(j.dump())});
}

void GameServer::Impl::apply_message(std::uint64_t client, const ClientMessage& msg) {
    if (driver != client) return;  // spectators cannot act
    if (const auto* in = std::get_if<InputMessage>(&msg)) {
        human = sanitize(in->input);
    } else if (const auto* op = std::get_if<OptionsMessage>(&msg)) {
        Options next = session.options();
        for (const auto& [k, v] : op->values) {
            try {
                if (!set_option(next, k, v)) spdlog::warn("unknown option key {}", k);
            } catch (const std::invalid_argument& e) {
                spdlog::warn("bad value for {}: {}", k, e.what());
            }
        }
        try {
            next.validate();
            session.set_options(next);
        } catch (const std::invalid_argument& e) {
            spdlog::warn("rejected options update: {}", e.what());
        }
    } else {
        const auto& s = std::get<SessionMessage>(msg);
        if (s.command == SessionMessage::Command::Reset) {
            session.reset_vehicle(reset_pose);
        } else {
            mode = s.mode;
        }
    }
}

void GameServer::Impl::handle(const Inbound& in) {
    switch (in.kind) {
        case Inbound::Kind::Join:
            seated.push_back(in.client);
            if (!driver) driver = in.client;
            hello(in.client, driver == in.client);
            break;
        case Inbound::Kind::Leave:
            std::erase(seated, in.client);
            if (driver == in.client) {
                driver.reset();
                human = {};
                if (!seated.empty()) {
                    driver = seated.front();
                    hello(*driver, true);
                }
            }
            break;
        case Inbound::Kind::Text:
            try {
                apply_message(in.client, parse_client_message(in.text));
            } catch (const ProtocolError& e) {
                spdlog::warn("client {}: {}", in.client, e.what());
            }
            break;
    }
}

void GameServer::Impl::sim_loop() {
    using clock = std::chrono::steady_clock;
    const auto dt = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(kPhysicsDt));
    const auto every =
        std::max<std::uint64_t>(1, std::uint64_t(std::llround(1.0 / (cfg.snapshot_hz * kPhysicsDt))));
    std::optional<AsyncRunWriter> writer;
    if (!cfg.capture_dir.empty()) writer.emplace(cfg.capture_dir, 256, QueuePolicy::DropNewest);
    std::optional<OptionsWatcher> watcher;
    if (!cfg.options_path.empty()) watcher.emplace(cfg.options_path, session.options());
    std::optional<AiInputReader> reader;
    if (!cfg.ai_input_path.empty()) reader.emplace(cfg.ai_input_path);

    auto next = clock::now();
    while (running.load()) {
        while (auto in = inbound.try_pop()) handle(*in);
        if (watcher && session.ticks() % 120 == 0) {
            if (auto o = watcher->poll()) session.set_options(*o);
        }

        const VehicleState& st = session.state();
        ControlInput ai{};
        if (mode == DriveMode::InGameAI) {
            try {
                ai = decide(sense(st.pose, session.track(), cfg.autopilot), cfg.autopilot, st.speed);
            } catch (const DegenerateSense&) {
                ai = {};
            }
        } else if (mode == DriveMode::ExternalAI && reader) {
            ai = command_to_control(reader->read(), st, session.options().vehicle);
        }
        const TickResult tr = session.tick(arbitrate(human, ai, mode));

        if (tr.log && writer) {
            const LogEvent& ev = *tr.log;
            Frame f = render(ev.state.pose, camera_for(session.options()), session.track(),
                             env_at(session.seed(), ev.sim_time_s), ev.sim_time_s, ev.seq);
            writer->submit({ev.timestamp_ms, ev.state.speed, ev.state.steer_deg, ev.throttle, frame_file_name(ev.seq)},
                           std::move(f));
        }

        if (session.ticks() % every == 0) {
            const std::uint64_t seq = ++snapshot_seq;
            const Frame cam = capture_frame(session, camera_for(session.options()), seq);
            const Frame preview = resample_area(cam, cfg.preview_width, cfg.preview_height);
            const auto coins = session.remaining_coins();
            const Frame map = render_minimap(session.track(), session.state().pose, cfg.minimap_px, coins);
            broadcast({{false, std::make_shared<const std::string>(snapshot_json(make_snapshot(session, mode, seq)))},
                       {true, std::make_shared<const std::string>(
                                  encode_binary_frame(FrameKind::Preview, std::uint32_t(seq), preview))},
                       {true, std::make_shared<const std::string>(
                                  encode_binary_frame(FrameKind::Minimap, std::uint32_t(seq), map))}});
            owner.snapshots_.fetch_add(1);
        }

        if (cfg.realtime) {
            next += dt;
            const auto now = clock::now();
            if (now - next > std::chrono::milliseconds(250)) next = now;  // fell far behind: resync
            std::this_thread::sleep_until(next);
        }
    }
    if (writer) writer->close();
}

void GameServer::Impl::request_stop() {
    {
        std::lock_guard lock(stop_mu);
        stop_requested = true;
    }
    stop_cv.notify_all();
}

GameServer::GameServer(Session session, Pose reset_pose, ServerConfig config)
    : impl_(std::make_unique<Impl>(*this, std::move(session), reset_pose, std::move(config))) {
    if (!(impl_->cfg.snapshot_hz > 0.0)) throw std::invalid_argument("snapshot rate must be positive");
}

GameServer::~GameServer() { stop(); }

void GameServer::start() {
    Impl& m = *impl_;
    if (m.running.load()) return;
    try {
        const tcp::endpoint ep(asio::ip::make_address(m.cfg.address), m.cfg.port);
        m.acceptor.open(ep.protocol());
        m.acceptor.set_option(asio::socket_base::reuse_address(true));
        m.acceptor.bind(ep);
        m.acceptor.listen();
    } catch (const boost::system::system_error& e) {
        beast::error_code ec;
        m.acceptor.close(ec);
        throw PortBusy("cannot listen on " + m.cfg.address + ":" + std::to_string(m.cfg.port) + ": " + e.what());
    }
    bound_port_ = m.acceptor.local_endpoint().port();
    m.signals.add(SIGINT);
    m.signals.add(SIGTERM);
    m.signals.async_wait([&m](beast::error_code ec, int) {
        if (!ec) m.request_stop();
    });
    m.do_accept();
    m.running = true;
    m.io_thread = std::thread([&m] { m.ioc.run(); });
    m.sim_thread = std::thread([&m] { m.sim_loop(); });
    spdlog::info("serving on ws://{}:{}", m.cfg.address, bound_port_.load());
}

void GameServer::wait() {
    Impl& m = *impl_;
    std::unique_lock lock(m.stop_mu);
    m.stop_cv.wait(lock, [&m] { return m.stop_requested; });
}

void GameServer::stop() {
    if (!impl_) return;
    Impl& m = *impl_;
    if (!m.running.exchange(false)) return;
    m.request_stop();
    if (m.sim_thread.joinable()) m.sim_thread.join();
    asio::post(m.ioc, [&m] {
        beast::error_code ec;
        m.acceptor.close(ec);
        m.signals.cancel(ec);
        const auto all = m.clients;
        for (const auto& [id, c] : all) c->shutdown();
        m.ioc.stop();
    });
    if (m.io_thread.joinable()) m.io_thread.join();
    m.inbound.close();
}

}  // namespace laneforge
