#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include "laneforge/bridge.hpp"
#include "laneforge/dataset.hpp"
#include "laneforge/server.hpp"
#include "laneforge/textutil.hpp"

namespace fs = std::filesystem;
using namespace laneforge;

namespace {

struct WorldArgs {
    std::string track;
    std::string options;
    std::string spawn;
    std::optional<int> spawn_point;
    std::uint64_t seed = 0;
};

void add_world(CLI::App* app, WorldArgs& w, bool track_required) {
    auto* t = app->add_option("--track", w.track, "Track layout file");
    if (track_required) t->required();
    t->check(CLI::ExistingFile);
    app->add_option("--options", w.options, "Options.pref file")->check(CLI::ExistingFile);
    app->add_option("--spawn", w.spawn, "PosRot.spawn file")->check(CLI::ExistingFile);
    app->add_option("--spawn-point", w.spawn_point, "Start on the centerline of this tile (loop order)");
    app->add_option("--seed", w.seed, "Environment seed");
}

struct World {
    Track track;
    Options options;
    Pose start;
};

World load_world(const WorldArgs& w) {
    World out{build_track(load_layout(w.track)), w.options.empty() ? Options{} : load_options(w.options), {}};
    if (w.spawn_point) {
        const auto points = out.track.spawn_points();
        if (*w.spawn_point < 0 || std::size_t(*w.spawn_point) >= points.size()) {
            throw std::invalid_argument("spawn point out of range");
        }
        const SpawnPoint& sp = points[std::size_t(*w.spawn_point)];
        out.start = {sp.position, sp.heading};
    } else {
        const SpawnSpec spec = w.spawn.empty() ? SpawnSpec{} : load_spawn(w.spawn);
        out.start = out.track.spawn_pose(spec.spawn_index, spec.heading_deg);
    }
    return out;
}

void print_drive(const DriveStats& st) {
    std::printf("laps %d collisions %d interventions %d sim_time_s %.2f\n", st.laps, st.collisions, st.interventions,
                st.sim_time_s);
    for (std::size_t i = 0; i < st.lap_times_s.size(); ++i) std::printf("lap %zu %.3f s\n", i + 1, st.lap_times_s[i]);
    std::printf("cycles %zu commands %zu dropped %zu stale_ticks %zu median_latency_ms %.3f p95_latency_ms %.3f\n",
                st.cycles, st.commands_written, st.dropped_cycles, st.stale_ticks, st.median_latency_ms,
                st.p95_latency_ms);
    if (!st.error.empty()) std::printf("aborted: %s\n", st.error.c_str());
}

std::vector<fs::path> runs_under(const std::string& dir) {
    auto runs = find_runs(dir);
    if (runs.empty()) throw std::invalid_argument("no runs (log.csv) under " + dir);
    return runs;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"laneforge: lane-following simulator and behavior-cloning pipeline"};
    app.require_subcommand(1);
    std::string log_level = "info";
    app.add_option("--log-level", log_level, "trace, debug, info, warn, error");

    // play-server
    auto* serve = app.add_subcommand("play-server", "Run a session behind the websocket interface");
    WorldArgs serve_world;
    add_world(serve, serve_world, true);
    ServerConfig server_cfg;
    std::string serve_mode = "human";
    std::string capture;
    std::string ai_input;
    serve->add_option("--port", server_cfg.port, "Websocket port (0 picks one)");
    serve->add_option("--address", server_cfg.address, "Listen address");
    serve->add_option("--mode", serve_mode, "human, ingame-ai or external-ai");
    serve->add_option("--capture", capture, "Log sampled frames into a new run under this directory");
    serve->add_option("--ai-input", ai_input, "AI.input path for external-ai mode");

    // generate
    auto* gen = app.add_subcommand("generate", "Headless data generation with the in-game AI");
    WorldArgs gen_world;
    add_world(gen, gen_world, true);
    std::string gen_mode = "ingame-ai";
    std::string gen_out;
    std::optional<double> gen_duration;
    std::optional<int> gen_laps;
    HeadlessExtras extras;
    bool no_capture = false;
    gen->add_option("--mode", gen_mode, "Only ingame-ai runs headless");
    gen->add_option("--out", gen_out, "Root directory for the new run")->required();
    auto* dur_opt = gen->add_option("--duration", gen_duration, "Simulated seconds");
    gen->add_option("--laps", gen_laps, "Stop after this many laps")->excludes(dur_opt);
    gen->add_option("--noise", extras.steer_noise, "Steering noise amplitude (axis units)");
    gen->add_option("--noise-hold", extras.noise_hold_s, "Seconds each noise draw is held");
    gen->add_flag("--no-capture", no_capture, "Drive without logging frames");

    // drive and evaluate
    auto* drive = app.add_subcommand("drive", "Drive a trained model in closed loop");
    auto* eval = app.add_subcommand("evaluate", "Offline MSE on logged runs or closed-loop laps");
    WorldArgs drive_world;
    WorldArgs eval_world;
    add_world(drive, drive_world, true);
    add_world(eval, eval_world, false);
    std::string model_path;
    bool sequence = false;
    DriveConfig drive_cfg;
    int laps = 3;
    std::optional<double> drive_duration;
    std::string transport = "inprocess";
    bool no_interventions = false;
    for (auto* sub : {drive, eval}) {
        sub->add_option("--model", model_path, "Model file")->required()->check(CLI::ExistingFile);
        sub->add_flag("--sequence", sequence, "Three-frame model");
        sub->add_option("--laps", laps, "Lap target");
        sub->add_option("--velocity", drive_cfg.velocity_mps, "Constant target speed (m/s)");
        sub->add_option("--slew", drive_cfg.max_slew_deg_per_s, "Steering slew limit (deg/s)");
        sub->add_option("--transport", transport, "inprocess or file");
        sub->add_option("--ai-input", ai_input, "AI.input path for the file transport");
        sub->add_option("--timeout", drive_cfg.timeout_s, "Simulated seconds before giving up");
        sub->add_flag("--no-interventions", no_interventions, "Never reset the vehicle");
    }
    drive->add_option("--duration", drive_duration, "Simulated seconds instead of a lap target");
    std::string eval_data;
    std::string pairs_out = "pairs.csv";
    eval->add_option("--data", eval_data, "Directory of runs for offline evaluation");
    eval->add_option("--pairs", pairs_out, "Where to write truth/prediction pairs");

    // train
    auto* tr = app.add_subcommand("train", "Train a steering model on logged runs");
    std::string train_data;
    std::string train_out;
    TrainConfig train_cfg;
    std::optional<double> max_seconds;
    bool no_mirror = false;
    tr->add_option("--data", train_data, "Directory of runs")->required()->check(CLI::ExistingDirectory);
    tr->add_option("--out", train_out, "Model output path")->required();
    tr->add_flag("--sequence", sequence, "Three-frame model");
    tr->add_option("--epochs", train_cfg.max_epochs, "Maximum epochs");
    tr->add_option("--patience", train_cfg.patience_epochs, "Epochs without improvement before stopping");
    tr->add_option("--min-delta", train_cfg.min_delta, "Improvement that resets patience (deg^2)");
    tr->add_option("--lr", train_cfg.learning_rate, "Learning rate");
    tr->add_option("--momentum", train_cfg.momentum, "Momentum");
    tr->add_option("--batch", train_cfg.batch_size, "Batch size");
    tr->add_option("--val-fraction", train_cfg.validation_fraction, "Validation fraction");
    tr->add_option("--seed", train_cfg.seed, "Initialization and split seed");
    tr->add_option("--max-seconds", max_seconds, "Wall-clock budget");
    tr->add_flag("--no-mirror", no_mirror, "Skip mirror augmentation");

    // preprocess
    auto* pre = app.add_subcommand("preprocess", "Run the lane pipeline over every frame of a corpus");
    std::string pre_in;
    std::string pre_out;
    std::string pre_cfg;
    int pre_w = 0;
    int pre_h = 0;
    pre->add_option("--in", pre_in, "Directory of runs")->required()->check(CLI::ExistingDirectory);
    pre->add_option("--out", pre_out, "Output directory")->required();
    pre->add_option("--config", pre_cfg, "Pipeline config file")->check(CLI::ExistingFile);
    pre->add_option("--width", pre_w, "Resample width (0 keeps the frame size)");
    pre->add_option("--height", pre_h, "Resample height (0 keeps the frame size)");

    CLI11_PARSE(app, argc, argv);
    spdlog::set_level(spdlog::level::from_str(log_level));

    try {
        if (*serve) {
            World w = load_world(serve_world);
            server_cfg.mode = drive_mode_from_string(serve_mode);
            server_cfg.options_path = serve_world.options;
            if (!capture.empty()) server_cfg.capture_dir = RunWriter::make_run_dir(capture);
            server_cfg.ai_input_path = ai_input.empty() && !server_cfg.capture_dir.empty()
                                           ? server_cfg.capture_dir / "AI.input"
                                           : fs::path(ai_input);
            GameServer server(Session(std::move(w.track), w.options, w.start, serve_world.seed), w.start, server_cfg);
            server.start();
            std::printf("listening on port %u\n", unsigned(server.port()));
            std::fflush(stdout);
            server.wait();
            server.stop();
            return 0;
        }
        if (*gen) {
            SessionConfig sc;
            sc.mode = drive_mode_from_string(gen_mode);
            sc.track_path = gen_world.track;
            sc.options_path = gen_world.options;
            sc.spawn_path = gen_world.spawn;
            sc.duration_s = gen_duration;
            sc.lap_target = gen_laps;
            sc.capture_enabled = !no_capture;
            sc.seed = gen_world.seed;
            World w = load_world(gen_world);
            Session session(std::move(w.track), w.options, w.start, gen_world.seed);
            const fs::path dir = RunWriter::make_run_dir(gen_out);
            const HeadlessResult r = run_headless(session, sc, dir, extras);
            std::printf("run %s\nrows %zu frames %zu collisions %d laps %d sim_time_s %.2f\n", r.dir.c_str(), r.rows,
                        r.frames, r.collisions, r.laps, r.sim_time_s);
            return 0;
        }
        if (*drive || (*eval && eval_data.empty())) {
            const WorldArgs& wa = *drive ? drive_world : eval_world;
            if (wa.track.empty()) throw std::invalid_argument("evaluate needs --data or --track");
            World w = load_world(wa);
            const SteerModel model = SteerModel::load(model_path);
            drive_cfg.arch = sequence ? Arch::Sequence : Arch::Single;
            drive_cfg.interventions = !no_interventions;
            if (*drive && drive_duration) {
                drive_cfg.duration_s = drive_duration;
            } else {
                drive_cfg.lap_target = laps;
            }
            if (transport == "file") {
                drive_cfg.transport = Transport::File;
                drive_cfg.ai_input_path = ai_input.empty() ? fs::path("AI.input") : fs::path(ai_input);
            } else if (transport != "inprocess") {
                throw std::invalid_argument("transport must be inprocess or file");
            }
            Session session(std::move(w.track), w.options, w.start, wa.seed);
            session.set_capture_enabled(false);
            const DriveStats st = external_drive_loop(session, model, drive_cfg);
            print_drive(st);
            return st.error.empty() ? 0 : 1;
        }
        if (*eval) {
            const SteerModel model = SteerModel::load(model_path);
            DatasetOptions dopt;
            dopt.arch = sequence ? Arch::Sequence : Arch::Single;
            dopt.width = model.input_shape().w;
            dopt.height = model.input_shape().h;
            const Dataset ds = load_dataset(runs_under(eval_data), dopt);
            const EvalResult r = evaluate(model, ds.samples);
            write_pairs_csv(pairs_out, r);
            double zero = 0.0;
            for (const auto& s : ds.samples) zero += s.steer_deg * s.steer_deg;
            zero /= double(ds.samples.size());
            std::printf("samples %zu mse %.4f zero_predictor_mse %.4f pairs %s\n", ds.samples.size(), r.mse, zero,
                        pairs_out.c_str());
            return 0;
        }
        if (*tr) {
            train_cfg.max_seconds = max_seconds;
            DatasetOptions dopt;
            dopt.arch = sequence ? Arch::Sequence : Arch::Single;
            Dataset ds = load_dataset(runs_under(train_data), dopt);
            std::printf("rows %zu filtered %zu examples %zu\n", ds.source_rows, ds.filtered_rows, ds.samples.size());
            if (!no_mirror) ds = mirrored(ds);
            const TrainResult r = train(ds.samples, dopt.arch, train_cfg, &ds.groups);
            r.model.save(train_out);
            std::printf("epochs %zu best_epoch %d best_val_mse %.4f zero_predictor_mse %.4f early_stop %s wall_s %.1f\n",
                        r.report.val_mse.size(), r.report.best_epoch, r.report.best_val_mse,
                        r.report.zero_predictor_val_mse, r.report.stopped_early ? "yes" : "no",
                        r.report.wall_seconds);
            return 0;
        }
        if (*pre) {
            const PipelineConfig pc = pre_cfg.empty() ? PipelineConfig{} : load_pipeline_config(pre_cfg);
            std::size_t frames = 0;
            for (const auto& run : runs_under(pre_in)) {
                const RunData data = load_run(run);
                const fs::path dst = fs::path(pre_out) / fs::relative(run, pre_in);
                fs::create_directories(dst / "frames");
                fs::copy_file(run / "log.csv", dst / "log.csv", fs::copy_options::overwrite_existing);
                if (fs::exists(run / "meta.txt")) {
                    fs::copy_file(run / "meta.txt", dst / "meta.txt", fs::copy_options::overwrite_existing);
                }
                for (const auto& row : data.rows) {
                    Frame f = preprocess(data.frame(row), pc);
                    if (pre_w > 0 && pre_h > 0) f = resample_area(f, pre_w, pre_h);
                    write_pgm(dst / row.frame_file, f);
                    ++frames;
                }
            }
            std::printf("frames %zu\n", frames);
            return 0;
        }
    } catch (const std::exception& e) {
        spdlog::error("{}", e.what());
        return 1;
    }
    return 0;
}
