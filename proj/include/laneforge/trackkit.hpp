#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "laneforge/geometry.hpp"

namespace laneforge {

enum class TileKind : std::uint8_t {
    Straight,
    SweepTurn,
    HardTurn,
    LaneChangeNarrow,
    LaneChangeWide,
    StartFinish,
};

std::string_view to_string(TileKind kind);
TileKind tile_kind_from_string(std::string_view name);

/// Tile edges, counter-clockwise from +x.
enum class Edge : std::uint8_t { East = 0, North = 1, West = 2, South = 3 };

struct TilePlacement {
    TileKind kind = TileKind::Straight;
    int col = 0;
    int row = 0;
    int rotation_deg = 0;  // one of 0, 90, 180, 270 (counter-clockwise)

    bool operator==(const TilePlacement&) const = default;
};

struct TrackParams {
    double tile_size_m = 0.61;
    double marker_width_m = 0.025;
    double lane_width_m = 0.45;
    double collider_inset_m = 0.02;
    int curve_segments = 48;  // polyline resolution of curved tiles
};

enum class SurfaceClass : std::uint8_t { Marker, Asphalt, OffTrack };

class TrackError : public std::runtime_error {
public:
    enum class Code { EmptyLayout, BadRotation, DuplicateCell, OpenLoop, NoStartFinish, BadIndex, Parse };

    TrackError(Code code, const std::string& what) : std::runtime_error(what), code_(code) {}
    Code code() const { return code_; }

private:
    Code code_;
};

/// Geometry of one placed tile, in world coordinates. The centerline and
/// the left/right offsets are oriented along the loop's direction of travel.
struct TileGeometry {
    TilePlacement placement;
    Vec2 center;
    std::array<Edge, 2> ports{};  // entry, exit (in travel direction)
    Polyline centerline;
    std::vector<Polyline> markers;
    std::vector<Polyline> colliders;
    Polyline corridor;  // closed polygon between the lane markers
    Aabb bounds;
};

struct Coin {
    Vec2 position;
};

struct SpawnPoint {
    Vec2 position;
    double heading = 0.0;
};

class Track {
public:
    const TrackParams& params() const { return params_; }
    std::span<const TileGeometry> tiles() const { return tiles_; }
    /// Tile indices in driving order, starting at the start/finish tile.
    std::span<const std::size_t> loop_order() const { return loop_order_; }
    std::span<const Coin> coins() const { return coins_; }
    std::span<const SpawnPoint> spawn_points() const { return spawn_points_; }
    std::span<const Segment> collider_segments() const { return collider_segments_; }
    std::vector<TilePlacement> layout() const;

    /// Lap gate across the lane on the start/finish tile, and the loop
    /// direction through it.
    Segment gate() const { return gate_; }
    Vec2 gate_forward() const { return gate_forward_; }

    Aabb bounds() const { return bounds_; }
    double loop_length() const { return loop_length_; }

    SurfaceClass sample_surface(Vec2 p) const;
    /// Distance along `dir` (unit) to the nearest collider, or max_range.
    double raycast_collider(Vec2 origin, Vec2 dir, double max_range) const;
    /// Pose at the center of tile `spawn_index` (layout order).
    Pose spawn_pose(int spawn_index, double heading_deg) const;

    /// Smallest fraction along p0->p1 at which the segment meets a collider.
    std::optional<double> first_collider_crossing(Vec2 p0, Vec2 p1) const;
    /// Distance from segment [a,b] to the nearest collider segment.
    double collider_clearance(Vec2 a, Vec2 b) const;

    /// Arc-length position of the nearest centerline point, measured along
    /// the loop from the start of the start/finish tile. Negative when the
    /// point is not on any tile.
    double loop_progress(Vec2 p) const;
    /// Signed lateral offset from the centerline (positive = left of travel).
    double lateral_offset(Vec2 p) const;
    /// Travel direction of the centerline nearest to p.
    Vec2 travel_direction(Vec2 p) const;

    const TileGeometry* tile_at(Vec2 p) const;

private:
    friend Track build_track(std::span<const TilePlacement>, const TrackParams&);

    struct Bucket {
        std::vector<std::uint32_t> marker_segments;  // indices into marker_segments_
        bool has_corridor_edge = false;
        bool center_inside = false;
    };
    struct TileIndex {
        std::vector<Bucket> buckets;
        std::size_t collider_begin = 0;
        std::size_t collider_end = 0;
        double loop_offset = 0.0;
    };
    static constexpr int kBuckets = 16;

    std::int64_t cell_key(int col, int row) const { return (std::int64_t(col) << 32) ^ std::uint32_t(row); }
    const Bucket& bucket_for(std::size_t tile, Vec2 p) const;
    SurfaceClass classify_in_tile(std::size_t tile, Vec2 p) const;
    void build_index();

    TrackParams params_;
    std::vector<TileGeometry> tiles_;
    std::vector<std::size_t> loop_order_;
    std::vector<Coin> coins_;
    std::vector<SpawnPoint> spawn_points_;
    std::vector<Segment> collider_segments_;
    std::vector<Segment> marker_segments_;
    std::vector<TileIndex> index_;
    std::unordered_map<std::int64_t, std::size_t> cells_;
    Segment gate_;
    Vec2 gate_forward_;
    Aabb bounds_;
    double loop_length_ = 0.0;
};

Track build_track(std::span<const TilePlacement> layout, const TrackParams& params = {});

/// Layout text: one tile per line, `kind col row rotation`, `#` comments.
std::vector<TilePlacement> parse_layout(std::string_view text);
std::string format_layout(std::span<const TilePlacement> layout);
std::vector<TilePlacement> load_layout(const std::filesystem::path& path);

/// Closed ring of `cols` x `rows` cells, counter-clockwise, start/finish on
/// the bottom row.
std::vector<TilePlacement> ring_layout(int cols, int rows);

/// Closed loop through orthogonally adjacent cells; the first cell must be a
/// straight run and becomes the start/finish tile.
std::vector<TilePlacement> path_layout(std::span<const std::pair<int, int>> cells);

struct SpawnSpec {
    int spawn_index = 0;
    double heading_deg = 0.0;
};

/// PosRot.spawn: line 1 spawn index, line 2 heading in degrees.
SpawnSpec parse_spawn(std::string_view text);
SpawnSpec load_spawn(const std::filesystem::path& path);
std::string format_spawn(const SpawnSpec& spec);

}  // namespace laneforge
