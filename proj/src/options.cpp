#include "laneforge/options.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <spdlog/spdlog.h>

#include "laneforge/textutil.hpp"

namespace laneforge {
namespace {

double* field(Options& o, std::string_view key) {
    if (key == "low_speed_steering_angle") return &o.vehicle.low_speed_steer_deg;
    if (key == "high_speed_steering_angle") return &o.vehicle.high_speed_steer_deg;
    if (key == "crossover_speed") return &o.vehicle.crossover_speed_mps;
    if (key == "steer_coefficient_front") return &o.vehicle.steer_coeff_front;
    if (key == "steer_coefficient_back") return &o.vehicle.steer_coeff_rear;
    if (key == "forward_slip_threshold") return &o.vehicle.fwd_slip_threshold;
    if (key == "side_slip_threshold") return &o.vehicle.side_slip_threshold;
    if (key == "speed_limiter") return &o.vehicle.speed_limit_mps;
    if (key == "vertical_fov") return &o.vertical_fov_deg;
    if (key == "sampling_camera_width_ratio") return &o.width_ratio;
    if (key == "sampling_rate") return &o.sampling_rate_hz;
    return nullptr;
}

}  // namespace

void Options::validate() const {
    vehicle.validate();
    if (!(vertical_fov_deg > 0.0 && vertical_fov_deg < 180.0)) throw std::invalid_argument("vertical_fov must be in (0, 180)");
    if (!(width_ratio > 0.0)) throw std::invalid_argument("sampling_camera_width_ratio must be positive");
    if (!(sampling_rate_hz > 0.0 && sampling_rate_hz <= 240.0)) {
        throw std::invalid_argument("sampling_rate must be in (0, 240]");
    }
}

bool Options::operator==(const Options& o) const {
    for (auto key : kOptionKeys) {
        if (*get_option(*this, key) != *get_option(o, key)) return false;
    }
    return vehicle.wheelbase_m == o.vehicle.wheelbase_m && vehicle.width_m == o.vehicle.width_m &&
           vehicle.max_accel_mps2 == o.vehicle.max_accel_mps2 && vehicle.max_brake_mps2 == o.vehicle.max_brake_mps2 &&
           vehicle.drag_per_s == o.vehicle.drag_per_s;
}

bool set_option(Options& options, std::string_view key, std::string_view value) {
    double* f = field(options, key);
    if (f == nullptr) return false;
    *f = parse_double(value);
    return true;
}

std::optional<double> get_option(const Options& options, std::string_view key) {
    double* f = field(const_cast<Options&>(options), key);
    if (f == nullptr) return std::nullopt;
    return *f;
}

OptionsParse parse_options(std::string_view text, const Options& base) {
    OptionsParse out{base, {}, {}};
    int lineno = 0;
    for (std::string_view line : split_lines(text)) {
        ++lineno;
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            out.errors.push_back("line " + std::to_string(lineno) + ": expected key=value");
            continue;
        }
        const std::string_view key = trim(line.substr(0, eq));
        const std::string_view value = trim(line.substr(eq + 1));
        try {
            if (!set_option(out.options, key, value)) out.unknown_keys.emplace_back(key);
        } catch (const std::invalid_argument&) {
            out.errors.push_back("line " + std::to_string(lineno) + ": bad value for " + std::string(key));
        }
    }
    return out;
}

std::string format_options(const Options& options) {
    std::string out;
    for (auto key : kOptionKeys) {
        out += key;
        out += '=';
        out += format_double(*get_option(options, key));
        out += '\n';
    }
    return out;
}

Options load_options(const std::filesystem::path& path, const Options& base) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open options file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    OptionsParse parsed = parse_options(ss.str(), base);
    if (!parsed.unknown_keys.empty()) {
        std::string list;
        for (const auto& k : parsed.unknown_keys) list += (list.empty() ? "" : ", ") + k;
        spdlog::warn("{}: unknown option keys rejected: {}", path.string(), list);
    }
    for (const auto& e : parsed.errors) spdlog::warn("{}: {}", path.string(), e);
    try {
        parsed.options.validate();
    } catch (const std::invalid_argument& e) {
        spdlog::warn("{}: {}; keeping previous options", path.string(), e.what());
        return base;
    }
    return parsed.options;
}

OptionsWatcher::OptionsWatcher(std::filesystem::path path, Options base)
    : path_(std::move(path)), base_(base), current_(base) {}

std::optional<Options> OptionsWatcher::poll() {
    std::error_code ec;
    const auto stamp = std::filesystem::last_write_time(path_, ec);
    if (ec) return std::nullopt;
    if (stamp_ && *stamp_ == stamp) return std::nullopt;
    stamp_ = stamp;
    current_ = load_options(path_, base_);
    return current_;
}

}  // namespace laneforge
