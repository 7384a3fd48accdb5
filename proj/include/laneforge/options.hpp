#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "laneforge/dynamics.hpp"

namespace laneforge {

/// The runtime-tunable settings read from Options.pref.
struct Options {
    VehicleParams vehicle;
    double vertical_fov_deg = 48.8;
    double width_ratio = 4.0 / 3.0;
    double sampling_rate_hz = 30.0;

    void validate() const;
    bool operator==(const Options& o) const;
};

inline constexpr std::array<std::string_view, 11> kOptionKeys = {
    "low_speed_steering_angle", "high_speed_steering_angle", "crossover_speed",
    "steer_coefficient_front",  "steer_coefficient_back",    "forward_slip_threshold",
    "side_slip_threshold",      "speed_limiter",             "vertical_fov",
    "sampling_camera_width_ratio", "sampling_rate",
};

struct OptionsParse {
    Options options;
    std::vector<std::string> unknown_keys;
    std::vector<std::string> errors;  // malformed lines and bad values
};

/// Applies `key=value` lines on top of `base`. Unknown keys and bad values
/// are reported and skipped; the rest still apply.
OptionsParse parse_options(std::string_view text, const Options& base = {});
std::string format_options(const Options& options);
/// Sets one key. Returns false for an unknown key; throws
/// std::invalid_argument when the value does not parse.
bool set_option(Options& options, std::string_view key, std::string_view value);
std::optional<double> get_option(const Options& options, std::string_view key);

/// Loads a file, logging a warning that lists every offending key.
Options load_options(const std::filesystem::path& path, const Options& base = {});

/// Re-reads an options file when its modification time changes.
class OptionsWatcher {
public:
    explicit OptionsWatcher(std::filesystem::path path, Options base = {});

    /// New options if the file changed since the last poll.
    std::optional<Options> poll();
    const Options& current() const { return current_; }

private:
    std::filesystem::path path_;
    Options base_;
    Options current_;
    std::optional<std::filesystem::file_time_type> stamp_;
};

}  // namespace laneforge
