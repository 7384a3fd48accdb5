#include <gtest/gtest.h>

#include <cmath>
#include <deque>

#include "laneforge/frame.hpp"
#include "laneforge/synthcam.hpp"
#include "support.hpp"

using namespace laneforge;

namespace {

const TileGeometry& start_tile(const Track& t) { return t.tiles()[t.loop_order()[0]]; }

EnvState clean_env(std::uint64_t seed = 1) { return {seed, 1.0, 0.0}; }

/// Independent pinhole projection of a ground point given in the vehicle
/// frame (forward, left). Returns fractional pixel coordinates.
std::optional<std::pair<double, double>> oracle_project(const CameraConfig& cam, double fwd, double left) {
    const double pitch = deg_to_rad(cam.pitch_down_deg);
    const double x = fwd - cam.mount_forward_m;
    const double depth = x * std::cos(pitch) + cam.mount_height_m * std::sin(pitch);
    if (depth <= 0.0) return std::nullopt;
    const double down = -x * std::sin(pitch) + cam.mount_height_m * std::cos(pitch);
    const double f = 0.5 * cam.height_px / std::tan(0.5 * deg_to_rad(cam.vertical_fov_deg));
    const double u = 0.5 * cam.width_px + f * (-left) / depth - 0.5;
    const double v = 0.5 * cam.height_px + f * down / depth - 0.5;
    return std::pair{u, v};
}

double world_level(const Track& t, Vec2 p) {
    switch (t.sample_surface(p)) {
        case SurfaceClass::Marker: return kMarkerLevel;
        case SurfaceClass::Asphalt: return kAsphaltLevel + asphalt_texture(p);
        default: return kOffTrackLevel;
    }
}

}  // namespace

TEST(CameraConfig, WidthFollowsRatio) {
    const CameraConfig c = CameraConfig::with_ratio(120, 4.0 / 3.0, 48.8);
    EXPECT_EQ(c.width_px, 160);
    EXPECT_EQ(CameraConfig::with_ratio(120, 16.0 / 9.0, 48.8).width_px, 213);
    EXPECT_NO_THROW(c.validate());
    CameraConfig bad = c;
    bad.vertical_fov_deg = 180.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = c;
    bad.mount_height_m = 0.0;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
    bad = c;
    bad.width_px = 150;
    EXPECT_THROW(bad.validate(), std::invalid_argument);
}

TEST(Render, AsphaltPlaneWithinConstructionBounds) {
    CameraConfig cam;
    const Pose pose{{1.0, 2.0}, 0.4};
    const Frame f = render_scene(
        pose, cam, [](Vec2 p) { return kAsphaltLevel + asphalt_texture(p); },
        [](double az, double el) { return background_level(7, az, el); }, 1.0);
    const double horizon = cam.horizon_row();
    for (int v = 0; v < cam.height_px; ++v) {
        for (int u = 0; u < cam.width_px; ++u) {
            if (v > horizon) {
                EXPECT_GE(f.at(u, v), 25);
                EXPECT_LE(f.at(u, v), 55);
            } else {
                EXPECT_LE(f.at(u, v), 60);
            }
        }
    }
}

TEST(Render, MarkerStripesConvergeTowardHorizon) {
    const Track& t = lftest::long_ring_track();
    CameraConfig cam;
    const Vec2 c = start_tile(t).center;
    const Pose pose{c, 0.0};
    const Frame f = render_clean(pose, cam, t, clean_env());
    double prev_gap = 1e9;
    int checked = 0;
    for (double fwd = 0.6; fwd <= 2.5; fwd += 0.1) {
        double us[2];
        for (int side = 0; side < 2; ++side) {
            const double left = side == 0 ? 0.225 : -0.225;
            const auto px = oracle_project(cam, fwd, left);
            ASSERT_TRUE(px);
            const int u = int(std::lround(px->first)), v = int(std::lround(px->second));
            ASSERT_GE(u, 0);
            ASSERT_LT(u, cam.width_px);
            ASSERT_GT(v, cam.horizon_row());
            // Far stripes narrow to about a pixel, so allow one column of slack.
            int peak = 0;
            for (int du = -1; du <= 1; ++du) {
                if (u + du >= 0 && u + du < cam.width_px) peak = std::max(peak, int(f.at(u + du, v)));
            }
            EXPECT_GE(peak, 200) << "fwd " << fwd << " side " << side;
            us[side] = px->first;
            ++checked;
        }
        const double gap = us[1] - us[0];
        EXPECT_LT(gap, prev_gap);
        prev_gap = gap;
    }
    EXPECT_GT(checked, 30);
}

TEST(Render, DeterministicGivenInputs) {
    const Track& t = lftest::ring_track();
    CameraConfig cam;
    const Pose pose{t.spawn_points()[1].position, t.spawn_points()[1].heading};
    const EnvState env = env_at(9, 3.25);
    const Frame a = render(pose, cam, t, env, 3.25, 17);
    const Frame b = render(pose, cam, t, env, 3.25, 17);
    EXPECT_TRUE(a.same_pixels(b));
    EXPECT_EQ(a.width, 160);
    EXPECT_EQ(a.height, 120);
}

TEST(Render, LightGainScalesIntensities) {
    const Track& t = lftest::ring_track();
    CameraConfig cam;
    const Pose pose{t.spawn_points()[1].position, t.spawn_points()[1].heading};
    const Frame bright = render_clean(pose, cam, t, {1, 1.5, 0.0});
    const Frame dim = render_clean(pose, cam, t, {1, 0.5, 0.0});
    long sb = 0, sd = 0;
    for (std::size_t i = 0; i < bright.pixels.size(); ++i) {
        EXPECT_GE(bright.pixels[i], dim.pixels[i]);
        sb += bright.pixels[i];
        sd += dim.pixels[i];
    }
    EXPECT_GT(sb, 2 * sd);
}

TEST(Speckle, PhaseZeroIsIdentity) {
    Frame f(160, 120, 33);
    const Frame out = speckle(f, {5, 1.0, 0.0});
    EXPECT_TRUE(out.same_pixels(f));
}

TEST(Speckle, FullPhaseHitsAboutTwoPercent) {
    Frame f(160, 120, 0);
    f.seq = 4;
    const Frame out = speckle(f, {5, 1.0, 1.0});
    int lit = 0;
    for (auto p : out.pixels) lit += p > 0;
    const double n = double(f.pixels.size()), p = 0.02;
    const double mean = n * p, sigma = std::sqrt(n * p * (1 - p));
    EXPECT_GT(lit, mean - 6 * sigma);
    EXPECT_LT(lit, mean + 6 * sigma);
    EXPECT_TRUE(speckle(f, {5, 1.0, 1.0}).same_pixels(out));
}

TEST(Speckle, OnlyRaisesPixels) {
    Frame f(64, 48, 200);
    const Frame out = speckle(f, {3, 1.0, 0.7});
    for (std::size_t i = 0; i < f.pixels.size(); ++i) EXPECT_GE(out.pixels[i], f.pixels[i]);
}

TEST(EnvAt, PureAndInRange) {
    for (double t = 0.0; t < 600.0; t += 7.3) {
        const EnvState a = env_at(11, t), b = env_at(11, t);
        EXPECT_EQ(a.light_gain, b.light_gain);
        EXPECT_EQ(a.speckle_phase, b.speckle_phase);
        EXPECT_GE(a.light_gain, 0.5);
        EXPECT_LE(a.light_gain, 1.5);
        EXPECT_GE(a.speckle_phase, 0.0);
        EXPECT_LE(a.speckle_phase, 1.0);
    }
    EXPECT_NE(env_at(1, 10.0).light_gain, env_at(2, 10.0).light_gain);
}

TEST(Horizon, MatchesAnalyticRow) {
    for (double pitch : {0.0, 5.0, 15.0, 25.0}) {
        CameraConfig cam;
        cam.pitch_down_deg = pitch;
        const double f = 0.5 * cam.height_px / std::tan(0.5 * deg_to_rad(cam.vertical_fov_deg));
        const double analytic = 0.5 * cam.height_px - 0.5 - f * std::tan(deg_to_rad(pitch));
        int first_ground = -1;
        for (int v = 0; v < cam.height_px; ++v) {
            const bool ground = pixel_ground_point({{0, 0}, 0.0}, cam, 40, v).has_value();
            if (ground && first_ground < 0) first_ground = v;
            if (first_ground >= 0) {
                EXPECT_TRUE(ground) << "pitch " << pitch << " row " << v;
            }
        }
        ASSERT_GE(first_ground, 0);
        // A horizon above the top row leaves every row on the ground.
        EXPECT_NEAR(first_ground, std::max(0.0, analytic), 1.0) << "pitch " << pitch;
        EXPECT_NEAR(cam.horizon_row(), analytic, 1e-9);
    }
}

TEST(Horizon, SkyPixelsNeverSampleGround) {
    const Track& t = lftest::ring_track();
    CameraConfig cam;
    const Pose pose{t.spawn_points()[1].position, t.spawn_points()[1].heading};
    std::size_t ground_calls_above = 0;
    const double horizon = cam.horizon_row();
    Frame f = render_scene(
        pose, cam, [&](Vec2) { return 200.0; }, [&](double, double) { return 3.0; }, 1.0);
    for (int v = 0; v < cam.height_px; ++v) {
        for (int u = 0; u < cam.width_px; ++u) {
            if (v < horizon) ground_calls_above += f.at(u, v) == 200;
            else EXPECT_EQ(f.at(u, v), 200);
        }
    }
    EXPECT_EQ(ground_calls_above, 0u);
}

TEST(Depth, StrictlyDecreasesDownEachColumn) {
    CameraConfig cam;
    for (int u = 0; u < cam.width_px; u += 13) {
        double prev = 1e18;
        for (int v = int(std::ceil(cam.horizon_row())); v < cam.height_px; ++v) {
            const auto r = pixel_ground_range(cam, u, v);
            ASSERT_TRUE(r);
            EXPECT_LT(*r, prev);
            prev = *r;
        }
    }
}

TEST(Render, MarkersVisibleFromAnyCorridorPoseOnAStraight) {
    const Track& t = lftest::long_ring_track();
    CameraConfig cam;
    const Vec2 c = t.tiles()[t.loop_order()[3]].center;
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> lat(-0.05, 0.05), yaw(-0.2, 0.2), along(-0.3, 0.3);
    for (int i = 0; i < 40; ++i) {
        const Pose pose{c + Vec2{along(rng), lat(rng)}, yaw(rng)};
        const Frame f = render_clean(pose, cam, t, clean_env());
        int bright = 0;
        for (int v = int(std::ceil(cam.horizon_row())); v < cam.height_px; ++v) {
            for (int u = 0; u < cam.width_px; ++u) bright += f.at(u, v) >= 200;
        }
        EXPECT_GT(bright, 0);
    }
}

TEST(Render, MirroredWorldGivesFlippedImage) {
    const Track& t = lftest::ring_track();
    CameraConfig cam;
    auto reflect = [](Vec2 p) { return Vec2{p.x, -p.y}; };
    for (int i = 0; i < 4; ++i) {
        const Pose pose{t.spawn_points()[std::size_t(i)].position, t.spawn_points()[std::size_t(i)].heading + 0.1 * i};
        const Pose mirror{reflect(pose.position), -pose.heading};
        const Frame a = render_scene(
            pose, cam, [&](Vec2 p) { return world_level(t, p); },
            [](double az, double el) { return background_level(3, az, el); }, 1.1);
        const Frame b = render_scene(
            mirror, cam, [&](Vec2 p) { return world_level(t, reflect(p)); },
            [](double az, double el) { return background_level(3, -az, el); }, 1.1);
        EXPECT_TRUE(flip_horizontal(a).same_pixels(b)) << "pose " << i;
    }
}

TEST(Minimap, RingIsClosedAndShowsVehicle) {
    const Track& t = lftest::ring_track();
    const int size = 128;
    const Pose pose = t.spawn_pose(1, 0.0);
    const Frame m = render_minimap(t, pose, size, {});
    // Flood from the corner over non-marker pixels: no corridor pixel may be
    // reachable, so the markers enclose the corridor.
    std::vector<char> seen(m.pixels.size(), 0);
    std::deque<std::pair<int, int>> q{{0, 0}};
    seen[0] = 1;
    while (!q.empty()) {
        auto [x, y] = q.front();
        q.pop_front();
        ASSERT_NE(m.at(x, y), kMinimapCorridor) << x << "," << y;
        for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
            const int nx = x + dx, ny = y + dy;
            if (nx < 0 || ny < 0 || nx >= size || ny >= size) continue;
            const std::size_t k = std::size_t(ny) * size + std::size_t(nx);
            if (seen[k] || m.pixels[k] == kMinimapMarker) continue;
            seen[k] = 1;
            q.push_back({nx, ny});
        }
    }
    // The vehicle marker sits over the tile center under the fit-to-bounds view.
    const Aabb b = t.bounds();
    const double margin = std::max(2.0, 0.04 * size);
    const double scale = (size - 2 * margin) / std::max(b.hi.x - b.lo.x, b.hi.y - b.lo.y);
    const Vec2 mid = (b.lo + b.hi) * 0.5;
    const double px = 0.5 * size + (pose.position.x - mid.x) * scale;
    const double py = 0.5 * size - (pose.position.y - mid.y) * scale;
    double sx = 0, sy = 0;
    int n = 0;
    for (int y = 0; y < size; ++y) {
        for (int x = 0; x < size; ++x) {
            if (m.at(x, y) == kMinimapVehicle) sx += x + 0.5, sy += y + 0.5, ++n;
        }
    }
    ASSERT_GT(n, 0);
    EXPECT_NEAR(sx / n, px, 3.0);
    EXPECT_NEAR(sy / n, py, 3.0);
}

TEST(Minimap, CoinsDrawnOnlyWhenGiven) {
    const Track& t = lftest::ring_track();
    const Pose pose = t.spawn_pose(1, 0.0);
    auto count = [](const Frame& f) {
        int n = 0;
        for (auto p : f.pixels) n += p == kMinimapCoin;
        return n;
    };
    EXPECT_EQ(count(render_minimap(t, pose, 128, {})), 0);
    std::vector<Vec2> coins;
    for (const auto& c : t.coins()) coins.push_back(c.position);
    EXPECT_GT(count(render_minimap(t, pose, 128, coins)), 0);
}

TEST(Frame, PgmRoundTripAndResample) {
    Frame f(5, 3);
    for (std::size_t i = 0; i < f.pixels.size(); ++i) f.pixels[i] = std::uint8_t(i * 17);
    const Frame back = decode_pgm(encode_pgm(f));
    EXPECT_TRUE(back.same_pixels(f));
    EXPECT_EQ(frame_file_name(42), "frame_00000042.pgm");
    Frame g(4, 2);
    g.pixels = {0, 100, 200, 40, 20, 60, 0, 80};
    const Frame r = resample_area(g, 2, 1);
    EXPECT_EQ(r.at(0, 0), 45);
    EXPECT_EQ(r.at(1, 0), 80);
    EXPECT_TRUE(flip_horizontal(flip_horizontal(f)).same_pixels(f));
    EXPECT_EQ(flip_horizontal(g).at(0, 0), 40);
}
