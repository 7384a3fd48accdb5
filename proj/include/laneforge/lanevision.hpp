#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "laneforge/frame.hpp"
#include "laneforge/geometry.hpp"

namespace laneforge {

/// Real-valued single-channel image.
struct Plane {
    int width = 0;
    int height = 0;
    std::vector<double> v;

    Plane() = default;
    Plane(int w, int h, double fill = 0.0) : width(w), height(h), v(std::size_t(w) * std::size_t(h), fill) {}

    double& at(int x, int y) { return v[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
    double at(int x, int y) const { return v[std::size_t(y) * std::size_t(width) + std::size_t(x)]; }
};

Plane to_plane(const Frame& f);
/// Rounds and clamps to [0, 255].
Frame to_frame(const Plane& p);

struct HslPlanes {
    Plane h;  // degrees [0, 360)
    Plane s;  // [0, 1]
    Plane l;  // [0, 1]
};

struct Hsl {
    double h = 0.0;
    double s = 0.0;
    double l = 0.0;
};

Hsl rgb_to_hsl(std::uint8_t r, std::uint8_t g, std::uint8_t b);
HslPlanes rgb_to_hsl(const RgbFrame& rgb);

struct MaskParams {
    double white_lightness = 0.75;
    double yellow_hue_lo = 40.0;
    double yellow_hue_hi = 65.0;
    double yellow_saturation = 0.5;
};

/// 255 where the pixel is white or yellow enough, else 0.
Plane mask_white_yellow(const HslPlanes& hsl, const MaskParams& params);

class BadKernel : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};
class BadThresholds : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Normalized 1-D Gaussian taps.
std::vector<double> gaussian_kernel(int ksize, double sigma);
/// Separable blur with half-sample symmetric padding (dcba|abcd).
Plane gaussian_blur(const Plane& in, double sigma, int ksize);
Frame gaussian_blur(const Frame& in, double sigma, int ksize);

/// Normalized polygon, (0,0) top-left and (1,1) bottom-right.
using RoiPolygon = std::vector<Vec2>;
RoiPolygon default_roi();
/// Zeroes pixels whose centers fall outside the polygon (even-odd; edges inside).
Plane roi_mask(const Plane& in, const RoiPolygon& polygon);

/// 255 on edge pixels, else 0.
Plane canny(const Plane& in, double low, double high);

enum class LineSide : std::uint8_t { Left, Right };

struct LineSeg {
    double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
    double slope = 0.0;
    LineSide side = LineSide::Left;
};

/// Slope in image coordinates (y down); vertical segments get +-1e9.
double segment_slope(double x1, double y1, double x2, double y2);

struct HoughParams {
    double rho_px = 1.0;
    double theta_deg = 1.0;
    int threshold = 20;
    double min_length_px = 10.0;
    double max_gap_px = 4.0;
};

std::vector<LineSeg> hough_lines(const Plane& edges, const HoughParams& params);

struct SlopeRange {
    double lo = 0.3;
    double hi = 5.0;
};

std::vector<LineSeg> filter_slopes(const std::vector<LineSeg>& segs, const SlopeRange& range);
/// Negative slope (rising to the right in image coordinates) is Left.
std::vector<LineSeg> group_by_slope(std::vector<LineSeg> segs);

struct LineFit {
    double m = 0.0;  // y = m x + c
    double c = 0.0;
};

struct LaneFit {
    std::optional<LineFit> left;
    std::optional<LineFit> right;
};

LaneFit fit_lane_lines(const std::vector<LineSeg>& segs, const SlopeRange& range);
Plane draw_lane_lines(int width, int height, const LaneFit& fit, double y_top);

enum class Stage : std::uint8_t {
    LensCorrect,
    Perspective,
    RgbToHsl,
    GaussianBlur,
    MaskWhiteYellow,
    Grayscale,
    Canny,
    RoiMask,
    Hough,
    SlopeFilter,
    GroupBySlope,
    FitLines,
    DrawLines,
    Blend,
};

std::string_view to_string(Stage s);
Stage stage_from_string(std::string_view name);

struct PipelineConfig {
    std::vector<Stage> stages{Stage::RgbToHsl, Stage::MaskWhiteYellow, Stage::GaussianBlur, Stage::RoiMask};
    double lens_k1 = 0.0;
    double lens_k2 = 0.0;
    std::array<double, 9> perspective{1, 0, 0, 0, 1, 0, 0, 0, 1};  // output pixel -> source pixel
    MaskParams mask;
    int blur_ksize = 5;
    double blur_sigma = 1.5;
    RoiPolygon roi = default_roi();
    double canny_low = 50.0;
    double canny_high = 150.0;
    HoughParams hough;
    SlopeRange slopes;
    double blend_alpha = 0.8;
    double blend_beta = 1.0;

    /// Throws std::invalid_argument when malformed.
    void validate() const;
};

PipelineConfig parse_pipeline_config(std::string_view text);
std::string format_pipeline_config(const PipelineConfig& config);
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

/// Everything the stages produce along the way.
struct PipelineState {
    RgbFrame rgb;
    std::optional<HslPlanes> hsl;
    Plane gray;
    bool gray_active = false;  // later image stages act on gray, else on rgb
    std::vector<LineSeg> segments;
    LaneFit fit;
};

void apply_stage(PipelineState& st, Stage stage, const PipelineConfig& config);
PipelineState run_pipeline(const RgbFrame& rgb, const PipelineConfig& config);
/// Runs the enabled stages and returns the single-channel result.
Frame preprocess(const RgbFrame& rgb, const PipelineConfig& config);
Frame preprocess(const Frame& gray, const PipelineConfig& config);

}  // namespace laneforge
