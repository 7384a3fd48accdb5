#include "laneforge/lanevision.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

#include "laneforge/textutil.hpp"

namespace laneforge {
namespace {

int reflect(int i, int n) {
    while (i < 0 || i >= n) i = i < 0 ? -1 - i : 2 * n - 1 - i;
    return i;
}

Plane channel(const RgbFrame& rgb, int c) {
    Plane p(rgb.width, rgb.height);
    for (std::size_t i = 0; i < p.v.size(); ++i) p.v[i] = rgb.rgb[3 * i + std::size_t(c)];
    return p;
}

void set_channel(RgbFrame& rgb, const Plane& p, int c) {
    for (std::size_t i = 0; i < p.v.size(); ++i) {
        rgb.rgb[3 * i + std::size_t(c)] = std::uint8_t(std::clamp(std::lround(p.v[i]), 0L, 255L));
    }
}

template <class Fn>
void map_image(PipelineState& st, Fn&& fn) {
    if (st.gray_active) {
        st.gray = fn(st.gray);
        return;
    }
    for (int c = 0; c < 3; ++c) set_channel(st.rgb, fn(channel(st.rgb, c)), c);
    st.hsl.reset();
}

double bilinear(const Plane& p, double x, double y) {
    if (x < 0.0 || y < 0.0 || x > p.width - 1 || y > p.height - 1) return 0.0;
    const int x0 = std::min(int(x), p.width - 1), y0 = std::min(int(y), p.height - 1);
    const int x1 = std::min(x0 + 1, p.width - 1), y1 = std::min(y0 + 1, p.height - 1);
    const double tx = x - x0, ty = y - y0;
    const double a = p.at(x0, y0) + (p.at(x1, y0) - p.at(x0, y0)) * tx;
    const double b = p.at(x0, y1) + (p.at(x1, y1) - p.at(x0, y1)) * tx;
    return a + (b - a) * ty;
}

Plane lens_correct(const Plane& in, double k1, double k2) {
    if (k1 == 0.0 && k2 == 0.0) return in;
    Plane out(in.width, in.height);
    const double cx = 0.5 * (in.width - 1), cy = 0.5 * (in.height - 1), f = double(in.width);
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            const double xn = (x - cx) / f, yn = (y - cy) / f;
            const double r2 = xn * xn + yn * yn;
            const double s = 1.0 + k1 * r2 + k2 * r2 * r2;
            out.at(x, y) = bilinear(in, cx + xn * s * f, cy + yn * s * f);
        }
    }
    return out;
}

Plane warp_perspective(const Plane& in, const std::array<double, 9>& h) {
    if (h == std::array<double, 9>{1, 0, 0, 0, 1, 0, 0, 0, 1}) return in;
    Plane out(in.width, in.height);
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            const double w = h[6] * x + h[7] * y + h[8];
            if (std::abs(w) < 1e-12) continue;
            out.at(x, y) = bilinear(in, (h[0] * x + h[1] * y + h[2]) / w, (h[3] * x + h[4] * y + h[5]) / w);
        }
    }
    return out;
}

Plane luma(const RgbFrame& rgb) {
    Plane p(rgb.width, rgb.height);
    for (std::size_t i = 0; i < p.v.size(); ++i) {
        p.v[i] = 0.299 * rgb.rgb[3 * i] + 0.587 * rgb.rgb[3 * i + 1] + 0.114 * rgb.rgb[3 * i + 2];
    }
    return p;
}

double roi_top(const RoiPolygon& poly) {
    double top = 1.0;
    for (const Vec2 p : poly) top = std::min(top, p.y);
    return top;
}

}  // namespace

Plane to_plane(const Frame& f) {
    Plane p(f.width, f.height);
    std::copy(f.pixels.begin(), f.pixels.end(), p.v.begin());
    return p;
}

Frame to_frame(const Plane& p) {
    Frame f(p.width, p.height);
    for (std::size_t i = 0; i < p.v.size(); ++i) f.pixels[i] = std::uint8_t(std::clamp(std::lround(p.v[i]), 0L, 255L));
    return f;
}

Hsl rgb_to_hsl(std::uint8_t r8, std::uint8_t g8, std::uint8_t b8) {
    const double r = r8 / 255.0, g = g8 / 255.0, b = b8 / 255.0;
    const double mx = std::max({r, g, b}), mn = std::min({r, g, b});
    Hsl out;
    out.l = 0.5 * (mx + mn);
    const double d = mx - mn;
    if (d == 0.0) return out;
    out.s = std::min(1.0, d / (1.0 - std::abs(2.0 * out.l - 1.0)));
    double h;
    if (mx == r) {
        h = std::fmod((g - b) / d, 6.0);
    } else if (mx == g) {
        h = (b - r) / d + 2.0;
    } else {
        h = (r - g) / d + 4.0;
    }
    h *= 60.0;
    if (h < 0.0) h += 360.0;
    out.h = h >= 360.0 ? h - 360.0 : h;
    return out;
}

HslPlanes rgb_to_hsl(const RgbFrame& rgb) {
    HslPlanes out{Plane(rgb.width, rgb.height), Plane(rgb.width, rgb.height), Plane(rgb.width, rgb.height)};
    for (std::size_t i = 0; i < out.h.v.size(); ++i) {
        const Hsl c = rgb_to_hsl(rgb.rgb[3 * i], rgb.rgb[3 * i + 1], rgb.rgb[3 * i + 2]);
        out.h.v[i] = c.h;
        out.s.v[i] = c.s;
        out.l.v[i] = c.l;
    }
    return out;
}

Plane mask_white_yellow(const HslPlanes& hsl, const MaskParams& p) {
    Plane out(hsl.l.width, hsl.l.height);
    for (std::size_t i = 0; i < out.v.size(); ++i) {
        const bool white = hsl.l.v[i] >= p.white_lightness;
        const bool yellow = hsl.h.v[i] >= p.yellow_hue_lo && hsl.h.v[i] <= p.yellow_hue_hi &&
                            hsl.s.v[i] >= p.yellow_saturation && hsl.l.v[i] >= 0.3;
        out.v[i] = (white || yellow) ? 255.0 : 0.0;
    }
    return out;
}

std::vector<double> gaussian_kernel(int ksize, double sigma) {
    if (ksize < 3 || ksize % 2 == 0) throw BadKernel("kernel size must be odd and at least 3");
    if (!(sigma > 0.0)) throw BadKernel("sigma must be positive");
    std::vector<double> k(static_cast<std::size_t>(ksize));
    const int r = ksize / 2;
    for (int i = -r; i <= r; ++i) k[std::size_t(i + r)] = std::exp(-double(i * i) / (2.0 * sigma * sigma));
    const double sum = std::accumulate(k.begin(), k.end(), 0.0);
    for (double& w : k) w /= sum;
    return k;
}

Plane gaussian_blur(const Plane& in, double sigma, int ksize) {
    const auto k = gaussian_kernel(ksize, sigma);
    const int r = ksize / 2;
    Plane tmp(in.width, in.height), out(in.width, in.height);
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[std::size_t(i + r)] * in.at(reflect(x + i, in.width), y);
            tmp.at(x, y) = acc;
        }
    }
    for (int y = 0; y < in.height; ++y) {
        for (int x = 0; x < in.width; ++x) {
            double acc = 0.0;
            for (int i = -r; i <= r; ++i) acc += k[std::size_t(i + r)] * tmp.at(x, reflect(y + i, in.height));
            out.at(x, y) = acc;
        }
    }
    return out;
}

Frame gaussian_blur(const Frame& in, double sigma, int ksize) { return to_frame(gaussian_blur(to_plane(in), sigma, ksize)); }

RoiPolygon default_roi() { return {{0.0, 1.0}, {0.0, 0.5}, {0.25, 0.25}, {0.75, 0.25}, {1.0, 0.5}, {1.0, 1.0}}; }

Plane roi_mask(const Plane& in, const RoiPolygon& polygon) {
    Plane out(in.width, in.height);
    if (polygon.size() < 3) return out;
    // Centered coordinates keep the test exactly mirror-symmetric.
    const double hw = 0.5 * in.width;
    std::vector<Vec2> poly;
    for (const Vec2 p : polygon) poly.push_back({p.x * in.width - hw, p.y * in.height});
    const std::size_t n = poly.size();
    for (int y = 0; y < in.height; ++y) {
        const double py = y + 0.5;
        for (int x = 0; x < in.width; ++x) {
            const double px = (x + 0.5) - hw;
            bool inside = false, on_edge = false;
            for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
                const Vec2 a = poly[j], b = poly[i];
                const double cr = (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x);
                if (cr == 0.0 && std::min(a.x, b.x) <= px && px <= std::max(a.x, b.x) && std::min(a.y, b.y) <= py &&
                    py <= std::max(a.y, b.y)) {
                    on_edge = true;
                    break;
                }
                if ((a.y > py) != (b.y > py)) {
                    const double xi = a.x + (py - a.y) * (b.x - a.x) / (b.y - a.y);
                    if (px < xi) inside = !inside;
                }
            }
            if (on_edge || inside) out.at(x, y) = in.at(x, y);
        }
    }
    return out;
}

Plane canny(const Plane& in, double low, double high) {
    if (!(low < high)) throw BadThresholds("canny thresholds must satisfy low < high");
    const int w = in.width, h = in.height;
    Plane mag(w, h);
    std::vector<std::uint8_t> dir(std::size_t(w) * std::size_t(h), 0);
    for (int y = 1; y + 1 < h; ++y) {
        for (int x = 1; x + 1 < w; ++x) {
            const double gx = (in.at(x + 1, y - 1) + 2.0 * in.at(x + 1, y) + in.at(x + 1, y + 1)) -
                              (in.at(x - 1, y - 1) + 2.0 * in.at(x - 1, y) + in.at(x - 1, y + 1));
            const double gy = (in.at(x - 1, y + 1) + 2.0 * in.at(x, y + 1) + in.at(x + 1, y + 1)) -
                              (in.at(x - 1, y - 1) + 2.0 * in.at(x, y - 1) + in.at(x + 1, y - 1));
            mag.at(x, y) = std::hypot(gx, gy);
            double a = rad_to_deg(std::atan2(gy, gx));
            if (a < 0.0) a += 180.0;
            std::uint8_t bin = 0;
            if (a >= 22.5 && a < 67.5) {
                bin = 1;
            } else if (a >= 67.5 && a < 112.5) {
                bin = 2;
            } else if (a >= 112.5 && a < 157.5) {
                bin = 3;
            }
            dir[std::size_t(y) * std::size_t(w) + std::size_t(x)] = bin;
        }
    }
    static constexpr int kStep[4][2] = {{1, 0}, {1, 1}, {0, 1}, {-1, 1}};
    Plane nms(w, h);
    for (int y = 1; y + 1 < h; ++y) {
        for (int x = 1; x + 1 < w; ++x) {
            const double m = mag.at(x, y);
            if (m <= 0.0) continue;
            const auto* s = kStep[dir[std::size_t(y) * std::size_t(w) + std::size_t(x)]];
            if (m > mag.at(x - s[0], y - s[1]) && m >= mag.at(x + s[0], y + s[1])) nms.at(x, y) = m;
        }
    }
    Plane out(w, h);
    std::vector<std::pair<int, int>> stack;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (nms.at(x, y) >= high && out.at(x, y) == 0.0) {
                out.at(x, y) = 255.0;
                stack.emplace_back(x, y);
                while (!stack.empty()) {
                    const auto [cx, cy] = stack.back();
                    stack.pop_back();
                    for (int dy = -1; dy <= 1; ++dy) {
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int nx = cx + dx, ny = cy + dy;
                            if (nx < 0 || ny < 0 || nx >= w || ny >= h || out.at(nx, ny) != 0.0) continue;
                            if (nms.at(nx, ny) >= low) {
                                out.at(nx, ny) = 255.0;
                                stack.emplace_back(nx, ny);
                            }
                        }
                    }
                }
            }
        }
    }
    return out;
}

double segment_slope(double x1, double y1, double x2, double y2) {
    const double dx = x2 - x1, dy = y2 - y1;
    if (dx == 0.0) return dy >= 0.0 ? 1e9 : -1e9;
    return dy / dx;
}

std::vector<LineSeg> hough_lines(const Plane& edges, const HoughParams& params) {
    if (!(params.rho_px > 0.0 && params.theta_deg > 0.0)) throw std::invalid_argument("hough resolutions must be positive");
    const int w = edges.width, h = edges.height;
    const int n_theta = std::max(1, int(std::lround(180.0 / params.theta_deg)));
    const double max_rho = std::hypot(double(w), double(h));
    const int n_rho = int(std::ceil(2.0 * max_rho / params.rho_px)) + 1;
    std::vector<double> cs(static_cast<std::size_t>(n_theta)), sn(static_cast<std::size_t>(n_theta));
    for (int t = 0; t < n_theta; ++t) {
        const double th = deg_to_rad(t * params.theta_deg);
        cs[std::size_t(t)] = std::cos(th);
        sn[std::size_t(t)] = std::sin(th);
    }
    auto rho_bin = [&](int x, int y, int t) {
        return int(std::lround((x * cs[std::size_t(t)] + y * sn[std::size_t(t)] + max_rho) / params.rho_px));
    };

    std::vector<std::pair<int, int>> pts;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            if (edges.at(x, y) > 0.0) pts.emplace_back(x, y);
        }
    }
    std::vector<int> acc(std::size_t(n_theta) * std::size_t(n_rho), 0);
    auto vote = [&](int x, int y, int delta) {
        for (int t = 0; t < n_theta; ++t) acc[std::size_t(t) * std::size_t(n_rho) + std::size_t(rho_bin(x, y, t))] += delta;
    };
    for (const auto& [x, y] : pts) vote(x, y, 1);
    std::vector<bool> used(pts.size(), false);

    std::vector<LineSeg> out;
    while (true) {
        const auto it = std::max_element(acc.begin(), acc.end());
        if (*it < params.threshold || *it <= 0) break;
        const std::size_t idx = std::size_t(it - acc.begin());
        const int t = int(idx / std::size_t(n_rho)), rb = int(idx % std::size_t(n_rho));
        const double rho = rb * params.rho_px - max_rho;
        const double c = cs[std::size_t(t)], s = sn[std::size_t(t)];
        const double tol = std::max(0.5 * params.rho_px, 0.75);

        // Unused support pixels ordered along the line direction (-s, c).
        std::vector<std::pair<double, std::size_t>> support;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (used[i]) continue;
            const auto [x, y] = pts[i];
            if (std::abs(x * c + y * s - rho) <= tol) support.emplace_back(-x * s + y * c, i);
        }
        std::sort(support.begin(), support.end());
        bool emitted = false;
        std::size_t run_start = 0;
        for (std::size_t k = 1; k <= support.size(); ++k) {
            if (k < support.size() && support[k].first - support[k - 1].first <= params.max_gap_px + 1.0) continue;
            const auto [ax, ay] = pts[support[run_start].second];
            const auto [bx, by] = pts[support[k - 1].second];
            if (std::hypot(double(bx - ax), double(by - ay)) >= params.min_length_px) {
                LineSeg seg{double(ax), double(ay), double(bx), double(by), segment_slope(ax, ay, bx, by), LineSide::Left};
                seg.side = seg.slope < 0.0 ? LineSide::Left : LineSide::Right;
                out.push_back(seg);
                emitted = true;
                for (std::size_t j = run_start; j < k; ++j) {
                    used[support[j].second] = true;
                    vote(pts[support[j].second].first, pts[support[j].second].second, -1);
                }
            }
            run_start = k;
        }
        if (!emitted) *it = 0;
    }
    return out;
}

std::vector<LineSeg> filter_slopes(const std::vector<LineSeg>& segs, const SlopeRange& range) {
    std::vector<LineSeg> out;
    for (const auto& s : segs) {
        const double a = std::abs(s.slope);
        if (a >= range.lo && a <= range.hi) out.push_back(s);
    }
    return out;
}

std::vector<LineSeg> group_by_slope(std::vector<LineSeg> segs) {
    std::stable_partition(segs.begin(), segs.end(), [](const LineSeg& s) { return s.slope < 0.0; });
    for (auto& s : segs) s.side = s.slope < 0.0 ? LineSide::Left : LineSide::Right;
    return segs;
}

LaneFit fit_lane_lines(const std::vector<LineSeg>& segs, const SlopeRange& range) {
    auto fit = [](const std::vector<Vec2>& pts) -> std::optional<LineFit> {
        if (pts.size() < 2) return std::nullopt;
        double mx = 0.0, my = 0.0;
        for (const Vec2 p : pts) {
            mx += p.x;
            my += p.y;
        }
        mx /= double(pts.size());
        my /= double(pts.size());
        double sxx = 0.0, sxy = 0.0;
        for (const Vec2 p : pts) {
            sxx += (p.x - mx) * (p.x - mx);
            sxy += (p.x - mx) * (p.y - my);
        }
        if (sxx == 0.0) return std::nullopt;
        const double m = sxy / sxx;
        return LineFit{m, my - m * mx};
    };
    std::vector<Vec2> left, right;
    for (const auto& s : group_by_slope(filter_slopes(segs, range))) {
        auto& dst = s.side == LineSide::Left ? left : right;
        dst.push_back({s.x1, s.y1});
        dst.push_back({s.x2, s.y2});
    }
    return {fit(left), fit(right)};
}

Plane draw_lane_lines(int width, int height, const LaneFit& fit, double y_top) {
    Plane out(width, height);
    for (const auto& line : {fit.left, fit.right}) {
        if (!line || line->m == 0.0) continue;
        for (int y = std::max(0, int(std::ceil(y_top))); y < height; ++y) {
            const int x = int(std::lround((y - line->c) / line->m));
            if (x >= 0 && x < width) out.at(x, y) = 255.0;
        }
    }
    return out;
}

std::string_view to_string(Stage s) {
    switch (s) {
        case Stage::LensCorrect: return "LensCorrect";
        case Stage::Perspective: return "Perspective";
        case Stage::RgbToHsl: return "RgbToHsl";
        case Stage::GaussianBlur: return "GaussianBlur";
        case Stage::MaskWhiteYellow: return "MaskWhiteYellow";
        case Stage::Grayscale: return "Grayscale";
        case Stage::Canny: return "Canny";
        case Stage::RoiMask: return "RoiMask";
        case Stage::Hough: return "Hough";
        case Stage::SlopeFilter: return "SlopeFilter";
        case Stage::GroupBySlope: return "GroupBySlope";
        case Stage::FitLines: return "FitLines";
        case Stage::DrawLines: return "DrawLines";
        case Stage::Blend: return "Blend";
    }
    return "?";
}

Stage stage_from_string(std::string_view name) {
    for (int i = 0; i <= int(Stage::Blend); ++i) {
        if (to_string(Stage(i)) == name) return Stage(i);
    }
    throw std::invalid_argument("unknown pipeline stage: " + std::string(name));
}

void PipelineConfig::validate() const {
    if (blur_ksize < 3 || blur_ksize % 2 == 0 || !(blur_sigma > 0.0)) throw BadKernel("bad blur kernel");
    if (!(canny_low < canny_high)) throw BadThresholds("canny low must be below high");
    if (roi.size() < 3) throw std::invalid_argument("roi polygon needs at least 3 vertices");
    if (!(hough.rho_px > 0.0 && hough.theta_deg > 0.0)) throw std::invalid_argument("hough resolutions must be positive");
    if (!(slopes.lo <= slopes.hi)) throw std::invalid_argument("slope range is empty");
}

PipelineConfig parse_pipeline_config(std::string_view text) {
    PipelineConfig c;
    auto nums = [](std::string_view v, char sep) {
        std::vector<double> out;
        for (auto part : split(v, sep)) out.push_back(parse_double(part));
        return out;
    };
    for (std::string_view line : split_lines(text)) {
        line = trim(strip_comment(line));
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string_view::npos) throw std::invalid_argument("pipeline config: expected key=value");
        const std::string_view key = trim(line.substr(0, eq)), val = trim(line.substr(eq + 1));
        if (key == "stages") {
            c.stages.clear();
            for (auto s : split(val, ',')) {
                if (!trim(s).empty()) c.stages.push_back(stage_from_string(trim(s)));
            }
        } else if (key == "lens_k1") {
            c.lens_k1 = parse_double(val);
        } else if (key == "lens_k2") {
            c.lens_k2 = parse_double(val);
        } else if (key == "perspective") {
            const auto v = nums(val, ',');
            if (v.size() != 9) throw std::invalid_argument("perspective needs 9 values");
            std::copy(v.begin(), v.end(), c.perspective.begin());
        } else if (key == "white_lightness") {
            c.mask.white_lightness = parse_double(val);
        } else if (key == "yellow_hue_lo") {
            c.mask.yellow_hue_lo = parse_double(val);
        } else if (key == "yellow_hue_hi") {
            c.mask.yellow_hue_hi = parse_double(val);
        } else if (key == "yellow_saturation") {
            c.mask.yellow_saturation = parse_double(val);
        } else if (key == "blur_ksize") {
            c.blur_ksize = int(parse_int(val));
        } else if (key == "blur_sigma") {
            c.blur_sigma = parse_double(val);
        } else if (key == "roi") {
            c.roi.clear();
            for (auto pt : split(val, ';')) {
                const auto v = nums(pt, ':');
                if (v.size() != 2) throw std::invalid_argument("roi vertex must be x:y");
                c.roi.push_back({v[0], v[1]});
            }
        } else if (key == "canny_low") {
            c.canny_low = parse_double(val);
        } else if (key == "canny_high") {
            c.canny_high = parse_double(val);
        } else if (key == "hough_rho") {
            c.hough.rho_px = parse_double(val);
        } else if (key == "hough_theta_deg") {
            c.hough.theta_deg = parse_double(val);
        } else if (key == "hough_threshold") {
            c.hough.threshold = int(parse_int(val));
        } else if (key == "hough_min_length") {
            c.hough.min_length_px = parse_double(val);
        } else if (key == "hough_max_gap") {
            c.hough.max_gap_px = parse_double(val);
        } else if (key == "slope_min") {
            c.slopes.lo = parse_double(val);
        } else if (key == "slope_max") {
            c.slopes.hi = parse_double(val);
        } else if (key == "blend_alpha") {
            c.blend_alpha = parse_double(val);
        } else if (key == "blend_beta") {
            c.blend_beta = parse_double(val);
        } else {
            throw std::invalid_argument("pipeline config: unknown key " + std::string(key));
        }
    }
    c.validate();
    return c;
}

std::string format_pipeline_config(const PipelineConfig& c) {
    std::ostringstream out;
    out << "stages=";
    for (std::size_t i = 0; i < c.stages.size(); ++i) out << (i ? "," : "") << to_string(c.stages[i]);
    out << "\nlens_k1=" << format_double(c.lens_k1) << "\nlens_k2=" << format_double(c.lens_k2) << "\nperspective=";
    for (std::size_t i = 0; i < 9; ++i) out << (i ? "," : "") << format_double(c.perspective[i]);
    out << "\nwhite_lightness=" << format_double(c.mask.white_lightness)
        << "\nyellow_hue_lo=" << format_double(c.mask.yellow_hue_lo)
        << "\nyellow_hue_hi=" << format_double(c.mask.yellow_hue_hi)
        << "\nyellow_saturation=" << format_double(c.mask.yellow_saturation) << "\nblur_ksize=" << c.blur_ksize
        << "\nblur_sigma=" << format_double(c.blur_sigma) << "\nroi=";
    for (std::size_t i = 0; i < c.roi.size(); ++i) {
        out << (i ? ";" : "") << format_double(c.roi[i].x) << ':' << format_double(c.roi[i].y);
    }
    out << "\ncanny_low=" << format_double(c.canny_low) << "\ncanny_high=" << format_double(c.canny_high)
        << "\nhough_rho=" << format_double(c.hough.rho_px) << "\nhough_theta_deg=" << format_double(c.hough.theta_deg)
        << "\nhough_threshold=" << c.hough.threshold << "\nhough_min_length=" << format_double(c.hough.min_length_px)
        << "\nhough_max_gap=" << format_double(c.hough.max_gap_px) << "\nslope_min=" << format_double(c.slopes.lo)
        << "\nslope_max=" << format_double(c.slopes.hi) << "\nblend_alpha=" << format_double(c.blend_alpha)
        << "\nblend_beta=" << format_double(c.blend_beta) << '\n';
    return out.str();
}

PipelineConfig load_pipeline_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_pipeline_config(ss.str());
}

void apply_stage(PipelineState& st, Stage stage, const PipelineConfig& c) {
    switch (stage) {
        case Stage::LensCorrect:
            map_image(st, [&](const Plane& p) { return lens_correct(p, c.lens_k1, c.lens_k2); });
            break;
        case Stage::Perspective:
            map_image(st, [&](const Plane& p) { return warp_perspective(p, c.perspective); });
            break;
        case Stage::RgbToHsl:
            st.hsl = rgb_to_hsl(st.rgb);
            break;
        case Stage::GaussianBlur:
            map_image(st, [&](const Plane& p) { return gaussian_blur(p, c.blur_sigma, c.blur_ksize); });
            break;
        case Stage::MaskWhiteYellow:
            if (!st.hsl) st.hsl = rgb_to_hsl(st.rgb);
            st.gray = mask_white_yellow(*st.hsl, c.mask);
            st.gray_active = true;
            break;
        case Stage::Grayscale:
            if (!st.gray_active) {
                st.gray = luma(st.rgb);
                st.gray_active = true;
            }
            break;
        case Stage::Canny:
            if (!st.gray_active) apply_stage(st, Stage::Grayscale, c);
            st.gray = canny(st.gray, c.canny_low, c.canny_high);
            break;
        case Stage::RoiMask:
            map_image(st, [&](const Plane& p) { return roi_mask(p, c.roi); });
            break;
        case Stage::Hough:
            if (!st.gray_active) apply_stage(st, Stage::Grayscale, c);
            st.segments = hough_lines(st.gray, c.hough);
            break;
        case Stage::SlopeFilter:
            st.segments = filter_slopes(st.segments, c.slopes);
            break;
        case Stage::GroupBySlope:
            st.segments = group_by_slope(std::move(st.segments));
            break;
        case Stage::FitLines:
            st.fit = fit_lane_lines(st.segments, c.slopes);
            break;
        case Stage::DrawLines:
        case Stage::Blend: {
            if (!st.gray_active) apply_stage(st, Stage::Grayscale, c);
            const Plane lines = draw_lane_lines(st.gray.width, st.gray.height, st.fit, roi_top(c.roi) * st.gray.height);
            if (stage == Stage::DrawLines) {
                st.gray = lines;
            } else {
                for (std::size_t i = 0; i < st.gray.v.size(); ++i) {
                    st.gray.v[i] = std::clamp(c.blend_alpha * st.gray.v[i] + c.blend_beta * lines.v[i], 0.0, 255.0);
                }
            }
            break;
        }
    }
}

PipelineState run_pipeline(const RgbFrame& rgb, const PipelineConfig& config) {
    PipelineState st;
    st.rgb = rgb;
    for (Stage s : config.stages) apply_stage(st, s, config);
    if (!st.gray_active) st.gray = luma(st.rgb);
    return st;
}

Frame preprocess(const RgbFrame& rgb, const PipelineConfig& config) { return to_frame(run_pipeline(rgb, config).gray); }

Frame preprocess(const Frame& gray, const PipelineConfig& config) {
    Frame out = preprocess(gray_to_rgb(gray), config);
    out.timestamp = gray.timestamp;
    out.seq = gray.seq;
    return out;
}

}  // namespace laneforge
