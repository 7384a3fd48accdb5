#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "laneforge/frame.hpp"
#include "laneforge/lanevision.hpp"
#include "laneforge/synthcam.hpp"
#include "support.hpp"

using namespace laneforge;

namespace {

Plane random_plane(int w, int h, std::uint64_t seed, double hi = 255.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, hi);
    Plane p(w, h);
    for (auto& v : p.v) v = std::round(u(rng));
    return p;
}

/// Sobel magnitude at an interior pixel, computed directly.
double sobel_mag(const Plane& p, int x, int y) {
    double gx = 0.0, gy = 0.0;
    const int kx[3][3] = {{-1, 0, 1}, {-2, 0, 2}, {-1, 0, 1}};
    for (int j = -1; j <= 1; ++j) {
        for (int i = -1; i <= 1; ++i) {
            gx += kx[j + 1][i + 1] * p.at(x + i, y + j);
            gy += kx[i + 1][j + 1] * p.at(x + i, y + j);
        }
    }
    return std::hypot(gx, gy);
}

int count_nonzero(const Plane& p) {
    int n = 0;
    for (double v : p.v) n += v != 0.0;
    return n;
}

}  // namespace

TEST(RgbToHsl, StandardIdentities) {
    const Hsl white = rgb_to_hsl(255, 255, 255);
    EXPECT_DOUBLE_EQ(white.s, 0.0);
    EXPECT_DOUBLE_EQ(white.l, 1.0);
    const Hsl red = rgb_to_hsl(255, 0, 0);
    EXPECT_DOUBLE_EQ(red.h, 0.0);
    EXPECT_DOUBLE_EQ(red.s, 1.0);
    EXPECT_DOUBLE_EQ(red.l, 0.5);
    const Hsl blue = rgb_to_hsl(0, 0, 255);
    EXPECT_DOUBLE_EQ(blue.h, 240.0);
    const Hsl asphalt = rgb_to_hsl(45, 45, 48);
    EXPECT_NEAR(asphalt.s, 3.0 / 93.0, 1e-12);
    EXPECT_NEAR(asphalt.l, 93.0 / 510.0, 1e-12);
    EXPECT_NEAR(asphalt.s, 0.032, 5e-4);
    EXPECT_NEAR(asphalt.l, 0.182, 5e-4);
}

TEST(RgbToHsl, RangesOverRandomColors) {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> c(0, 255);
    for (int i = 0; i < 20000; ++i) {
        const Hsl h = rgb_to_hsl(std::uint8_t(c(rng)), std::uint8_t(c(rng)), std::uint8_t(c(rng)));
        EXPECT_GE(h.h, 0.0);
        EXPECT_LT(h.h, 360.0);
        EXPECT_GE(h.s, 0.0);
        EXPECT_LE(h.s, 1.0);
        EXPECT_GE(h.l, 0.0);
        EXPECT_LE(h.l, 1.0);
    }
}

TEST(MaskWhiteYellow, Examples) {
    RgbFrame rgb(3, 1);
    const std::uint8_t px[3][3] = {{235, 235, 235}, {45, 45, 48}, {255, 255, 0}};
    for (int i = 0; i < 3; ++i) std::copy(px[i], px[i] + 3, rgb.at(i, 0));
    const Plane m = mask_white_yellow(rgb_to_hsl(rgb), MaskParams{});
    EXPECT_EQ(m.at(0, 0), 255.0);
    EXPECT_EQ(m.at(1, 0), 0.0);
    EXPECT_EQ(m.at(2, 0), 255.0);
}

TEST(MaskWhiteYellow, DarkYellowIsRejected) {
    RgbFrame rgb(1, 1);
    const std::uint8_t dark[3] = {120, 110, 0};  // hue about 55, lightness below 0.3
    std::copy(dark, dark + 3, rgb.at(0, 0));
    EXPECT_EQ(mask_white_yellow(rgb_to_hsl(rgb), MaskParams{}).at(0, 0), 0.0);
}

TEST(GaussianBlur, ConstantFrameUnchanged) {
    Plane p(17, 11, 93.0);
    const Plane out = gaussian_blur(p, 1.5, 5);
    for (double v : out.v) EXPECT_NEAR(v, 93.0, 1e-12);
}

TEST(GaussianBlur, ImpulseGivesNormalizedStamp) {
    Plane p(9, 9, 0.0);
    p.at(4, 4) = 1.0;
    const Plane out = gaussian_blur(p, 1.0, 3);
    const double e = std::exp(-0.5);
    const double g[3] = {e / (1 + 2 * e), 1 / (1 + 2 * e), e / (1 + 2 * e)};
    for (int y = 0; y < 9; ++y) {
        for (int x = 0; x < 9; ++x) {
            const int dx = x - 4, dy = y - 4;
            const double expect = std::abs(dx) <= 1 && std::abs(dy) <= 1 ? g[dx + 1] * g[dy + 1] : 0.0;
            EXPECT_NEAR(out.at(x, y), expect, 1e-15);
        }
    }
}

TEST(GaussianBlur, PreservesTotalIntensity) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const Plane p = random_plane(23, 14, seed);
        const Plane out = gaussian_blur(p, 1.5, 5);
        double a = 0.0, b = 0.0;
        for (double v : p.v) a += v;
        for (double v : out.v) b += v;
        EXPECT_NEAR(b / a, 1.0, 1e-6);
    }
}

TEST(GaussianBlur, BadKernel) {
    Plane p(5, 5);
    EXPECT_THROW(gaussian_blur(p, 1.0, 4), BadKernel);
    EXPECT_THROW(gaussian_blur(p, 1.0, 1), BadKernel);
    EXPECT_THROW(gaussian_kernel(2, 1.0), BadKernel);
    const auto k = gaussian_kernel(7, 2.0);
    double s = 0.0;
    for (double v : k) s += v;
    EXPECT_NEAR(s, 1.0, 1e-15);
}

TEST(RoiMask, Examples) {
    const Plane p = random_plane(20, 16, 4, 254.0);
    Plane q = p;
    for (auto& v : q.v) v += 1.0;
    const Plane full = roi_mask(q, {{0, 0}, {1, 0}, {1, 1}, {0, 1}});
    EXPECT_EQ(full.v, q.v);
    EXPECT_EQ(count_nonzero(roi_mask(q, {{0.2, 0.2}, {0.8, 0.8}, {0.5, 0.5}})), 0);
    const Plane lower = roi_mask(q, {{0, 1}, {0.1, 0.5}, {0.9, 0.5}, {1, 1}});
    for (int y = 0; y < 8; ++y) {
        for (int x = 0; x < 20; ++x) EXPECT_EQ(lower.at(x, y), 0.0);
    }
    EXPECT_EQ(lower.at(10, 15), q.at(10, 15));
}

TEST(Canny, UniformHasNoEdges) { EXPECT_EQ(count_nonzero(canny(Plane(16, 16, 77.0), 50, 150)), 0); }

TEST(Canny, VerticalStepGivesOneThinLine) {
    Plane p(16, 16, 0.0);
    for (int y = 0; y < 16; ++y) {
        for (int x = 8; x < 16; ++x) p.at(x, y) = 255.0;
    }
    const Plane e = canny(p, 50, 150);
    int column = -1;
    for (int y = 1; y < 15; ++y) {
        int n = 0;
        for (int x = 0; x < 16; ++x) {
            if (e.at(x, y) == 0.0) continue;
            ++n;
            if (column < 0) column = x;
            EXPECT_EQ(x, column);
        }
        EXPECT_EQ(n, 1) << "row " << y;
    }
    EXPECT_TRUE(column == 7 || column == 8);
}

TEST(Canny, RaisingLowNeverAddsEdges) {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
        const Plane p = random_plane(16, 16, seed);
        const Plane base = canny(p, 100, 600);
        for (double low : {200.0, 300.0, 450.0, 599.0}) {
            const Plane e = canny(p, low, 600);
            for (std::size_t i = 0; i < e.v.size(); ++i) {
                if (e.v[i] != 0.0) {
                    EXPECT_NE(base.v[i], 0.0);
                }
            }
        }
    }
}

TEST(Canny, HysteresisConnectivity) {
    const double low = 150, high = 500;
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        Plane p = random_plane(16, 16, seed + 100);
        p = gaussian_blur(p, 1.0, 3);
        const Plane e = canny(p, low, high);
        // Components of edge pixels, 8-connected: each must hold a strong pixel.
        std::vector<int> comp(e.v.size(), -1);
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 16; ++x) {
                if (e.at(x, y) == 0.0 || comp[std::size_t(y * 16 + x)] >= 0) continue;
                bool strong = false;
                std::vector<std::pair<int, int>> stack{{x, y}};
                comp[std::size_t(y * 16 + x)] = 1;
                while (!stack.empty()) {
                    auto [cx, cy] = stack.back();
                    stack.pop_back();
                    ASSERT_TRUE(cx > 0 && cy > 0 && cx < 15 && cy < 15);
                    const double m = sobel_mag(p, cx, cy);
                    EXPECT_GE(m, low);
                    strong |= m >= high;
                    for (int dy = -1; dy <= 1; ++dy) {
                        for (int dx = -1; dx <= 1; ++dx) {
                            const int nx = cx + dx, ny = cy + dy;
                            if (nx < 0 || ny < 0 || nx >= 16 || ny >= 16) continue;
                            const std::size_t k = std::size_t(ny * 16 + nx);
                            if (e.v[k] == 0.0 || comp[k] >= 0) continue;
                            comp[k] = 1;
                            stack.push_back({nx, ny});
                        }
                    }
                }
                EXPECT_TRUE(strong);
            }
        }
    }
}

TEST(Canny, BadThresholds) { EXPECT_THROW(canny(Plane(4, 4), 10, 10), BadThresholds); }

TEST(Hough, BlankGivesNothing) { EXPECT_TRUE(hough_lines(Plane(40, 40), HoughParams{}).empty()); }

TEST(Hough, DiagonalLineRecoversAngle) {
    Plane e(48, 48);
    for (int i = 0; i < 30; ++i) e.at(8 + i, 8 + i) = 255.0;
    const auto segs = hough_lines(e, HoughParams{});
    ASSERT_EQ(segs.size(), 1u);
    // Segment endpoints are unordered, so fold the direction to [0, 180).
    const double angle = std::fmod(rad_to_deg(std::atan2(segs[0].y2 - segs[0].y1, segs[0].x2 - segs[0].x1)) + 180.0, 180.0);
    EXPECT_NEAR(angle, 45.0, 1.0);
    EXPECT_NEAR(segs[0].slope, 1.0, 1e-9);
    EXPECT_EQ(segs[0].side, LineSide::Right);
}

TEST(Hough, PerpendicularLinesGiveTwoPeaks) {
    Plane e(64, 64);
    for (int i = 0; i < 30; ++i) {
        e.at(10 + i, 12) = 255.0;
        e.at(50, 20 + i) = 255.0;
    }
    const auto segs = hough_lines(e, HoughParams{});
    ASSERT_EQ(segs.size(), 2u);
    const double a0 = std::atan2(segs[0].y2 - segs[0].y1, segs[0].x2 - segs[0].x1);
    const double a1 = std::atan2(segs[1].y2 - segs[1].y1, segs[1].x2 - segs[1].x1);
    EXPECT_NEAR(std::abs(std::cos(a0 - a1)), 0.0, 1e-9);
}

TEST(SegmentSlope, VerticalGuard) {
    EXPECT_EQ(segment_slope(3, 1, 3, 9), 1e9);
    EXPECT_EQ(segment_slope(3, 9, 3, 1), -1e9);
    EXPECT_DOUBLE_EQ(segment_slope(0, 0, 2, -4), -2.0);
}

TEST(FitLaneLines, HorizontalSegmentsFilteredOut) {
    const std::vector<LineSeg> segs{{0, 10, 20, 12, 0.1, LineSide::Right}, {0, 30, 30, 33, 0.1, LineSide::Right}};
    const LaneFit f = fit_lane_lines(segs, SlopeRange{});
    EXPECT_FALSE(f.left);
    EXPECT_FALSE(f.right);
}

TEST(FitLaneLines, CollinearSegmentsFitExactly) {
    // y = -1.5 x + 100
    auto seg = [](double xa, double xb) {
        return LineSeg{xa, -1.5 * xa + 100, xb, -1.5 * xb + 100, -1.5, LineSide::Left};
    };
    const LaneFit f = fit_lane_lines({seg(10, 20), seg(30, 45)}, SlopeRange{});
    ASSERT_TRUE(f.left);
    EXPECT_FALSE(f.right);
    EXPECT_NEAR(f.left->m, -1.5, 1e-9);
    EXPECT_NEAR(f.left->c, 100.0, 1e-9);
}

TEST(FitLaneLines, NoisyCloudsRecoverBothSlopes) {
    std::mt19937_64 rng(5);
    std::normal_distribution<double> noise(0.0, 0.5);
    std::uniform_real_distribution<double> xs(0.0, 60.0), len(5.0, 15.0);
    std::vector<LineSeg> segs;
    for (int i = 0; i < 40; ++i) {
        for (double m : {-1.0, 1.0}) {
            const double c = m < 0 ? 120.0 : 20.0;
            const double xa = xs(rng), xb = xa + len(rng);
            const double ya = m * xa + c + noise(rng), yb = m * xb + c + noise(rng);
            segs.push_back({xa, ya, xb, yb, segment_slope(xa, ya, xb, yb), LineSide::Left});
        }
    }
    const LaneFit f = fit_lane_lines(segs, SlopeRange{});
    ASSERT_TRUE(f.left && f.right);
    EXPECT_NEAR(f.left->m, -1.0, 0.05);
    EXPECT_NEAR(f.right->m, 1.0, 0.05);
}

TEST(Preprocess, CorridorOutputLiesOnMarkers) {
    const Track& t = lftest::long_ring_track();
    CameraConfig cam;
    const Pose pose{t.tiles()[t.loop_order()[2]].center, 0.0};
    const Frame raw = render_clean(pose, cam, t, {1, 1.0, 0.0});
    const Frame out = preprocess(raw, PipelineConfig{});
    // Marker pixels from the ground projection, dilated by the blur radius.
    std::vector<char> marker(raw.pixels.size(), 0);
    for (int v = 0; v < cam.height_px; ++v) {
        for (int u = 0; u < cam.width_px; ++u) {
            const auto g = pixel_ground_point(pose, cam, u, v);
            if (!g || t.sample_surface(*g) != SurfaceClass::Marker) continue;
            for (int dv = -3; dv <= 3; ++dv) {
                for (int du = -3; du <= 3; ++du) {
                    const int x = u + du, y = v + dv;
                    if (x >= 0 && y >= 0 && x < cam.width_px && y < cam.height_px) marker[std::size_t(y * cam.width_px + x)] = 1;
                }
            }
        }
    }
    int nonzero = 0, on = 0;
    for (std::size_t i = 0; i < out.pixels.size(); ++i) {
        if (out.pixels[i] == 0) continue;
        ++nonzero;
        on += marker[i];
    }
    ASSERT_GT(nonzero, 100);
    EXPECT_GT(double(on) / nonzero, 0.95);
}

TEST(Preprocess, BlackInBlackOut) {
    const Frame out = preprocess(Frame(160, 120, 0), PipelineConfig{});
    for (auto p : out.pixels) EXPECT_EQ(p, 0);
}

TEST(Preprocess, DefaultEqualsManualChain) {
    const Track& t = lftest::ring_track();
    const Frame raw = render(t.spawn_pose(1, 0.0), CameraConfig{}, t, env_at(3, 1.0), 1.0, 5);
    PipelineConfig cfg;
    const Plane mask = mask_white_yellow(rgb_to_hsl(gray_to_rgb(raw)), cfg.mask);
    const Plane blurred = gaussian_blur(mask, cfg.blur_sigma, cfg.blur_ksize);
    const Frame manual = to_frame(roi_mask(blurred, cfg.roi));
    EXPECT_TRUE(preprocess(raw, cfg).same_pixels(manual));
}

TEST(Preprocess, MirrorEquivariant) {
    const Track& t = lftest::ring_track();
    for (int i = 0; i < 6; ++i) {
        const auto& sp = t.spawn_points()[std::size_t(i)];
        const Frame raw = render({sp.position, sp.heading + 0.05 * i}, CameraConfig{}, t, env_at(4, i), i, 2);
        EXPECT_TRUE(preprocess(flip_horizontal(raw), PipelineConfig{}).same_pixels(
            flip_horizontal(preprocess(raw, PipelineConfig{}))));
    }
}

TEST(Preprocess, EveryStagePreservesDimensionsAndRange) {
    const Track& t = lftest::ring_track();
    const RgbFrame rgb = render_rgb(t.spawn_pose(1, 0.0), CameraConfig{}, t, env_at(1, 0.0));
    PipelineConfig cfg;
    cfg.stages = {Stage::LensCorrect, Stage::Perspective, Stage::RgbToHsl,    Stage::MaskWhiteYellow, Stage::GaussianBlur,
                  Stage::Grayscale,   Stage::Canny,       Stage::RoiMask,     Stage::Hough,           Stage::SlopeFilter,
                  Stage::GroupBySlope, Stage::FitLines,   Stage::DrawLines,   Stage::Blend};
    PipelineState st;
    st.rgb = rgb;
    for (Stage s : cfg.stages) {
        apply_stage(st, s, cfg);
        EXPECT_EQ(st.rgb.width, 160);
        EXPECT_EQ(st.rgb.height, 120);
        if (st.gray_active) {
            EXPECT_EQ(st.gray.width, 160) << to_string(s);
            EXPECT_EQ(st.gray.height, 120) << to_string(s);
            for (double v : st.gray.v) {
                ASSERT_GE(v, 0.0) << to_string(s);
                ASSERT_LE(v, 255.0) << to_string(s);
            }
        }
        if (s == Stage::MaskWhiteYellow) {
            for (double v : st.gray.v) ASSERT_TRUE(v == 0.0 || v == 255.0);
        }
    }
    const Frame out = preprocess(rgb, cfg);
    EXPECT_EQ(out.width, 160);
    EXPECT_EQ(out.height, 120);
    EXPECT_TRUE(preprocess(rgb, cfg).same_pixels(out));
}

TEST(PipelineConfig, TextRoundTripAndValidation) {
    PipelineConfig c;
    c.stages = {Stage::RgbToHsl, Stage::MaskWhiteYellow, Stage::Canny};
    c.mask.white_lightness = 0.8;
    c.roi = {{0, 1}, {0.5, 0.2}, {1, 1}};
    c.canny_low = 20;
    const std::string text = format_pipeline_config(c);
    EXPECT_EQ(format_pipeline_config(parse_pipeline_config(text)), text);
    EXPECT_THROW(parse_pipeline_config("canny_low=200\ncanny_high=100\n"), std::invalid_argument);
    EXPECT_THROW(parse_pipeline_config("roi=0:0;1:1\n"), std::invalid_argument);
    EXPECT_THROW(parse_pipeline_config("stages=Sharpen\n"), std::invalid_argument);
    EXPECT_THROW(parse_pipeline_config("blur_ksize=4\n"), std::invalid_argument);
    for (int i = 0; i <= int(Stage::Blend); ++i) {
        const Stage s = static_cast<Stage>(i);
        EXPECT_EQ(stage_from_string(to_string(s)), s);
    }
}
