#include "laneforge/trackkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

namespace laneforge {
namespace {

constexpr std::array<std::string_view, 6> kKindNames = {
    "Straight", "SweepTurn", "HardTurn", "LaneChangeNarrow", "LaneChangeWide", "StartFinish"};

constexpr double kNarrowShift = 0.06;  // lateral excursion of lane-change tiles, m
constexpr double kWideShift = 0.12;

Edge rotate_edge(Edge e, int quarter_turns) {
    return static_cast<Edge>((static_cast<int>(e) + quarter_turns) % 4);
}
Edge opposite(Edge e) { return rotate_edge(e, 2); }

std::pair<int, int> edge_delta(Edge e) {
    switch (e) {
        case Edge::East: return {1, 0};
        case Edge::North: return {0, 1};
        case Edge::West: return {-1, 0};
        case Edge::South: return {0, -1};
    }
    return {0, 0};
}

/// Ports of the unrotated tile, in the order its local centerline runs.
std::array<Edge, 2> local_ports(TileKind kind) {
    switch (kind) {
        case TileKind::SweepTurn:
        case TileKind::HardTurn: return {Edge::South, Edge::East};
        default: return {Edge::West, Edge::East};
    }
}

struct LocalCurve {
    std::vector<Vec2> points;
    std::vector<Vec2> left;  // unit left normals (unused for HardTurn)
};

LocalCurve local_curve(TileKind kind, double h, int segments) {
    LocalCurve c;
    auto push = [&](Vec2 p, Vec2 tangent) {
        c.points.push_back(p);
        c.left.push_back(left_normal(tangent * (1.0 / tangent.norm())));
    };
    switch (kind) {
        case TileKind::Straight:
        case TileKind::StartFinish:
            push({-h, 0.0}, {1.0, 0.0});
            push({h, 0.0}, {1.0, 0.0});
            break;
        case TileKind::SweepTurn: {
            const Vec2 corner{h, -h};
            for (int i = 0; i <= segments; ++i) {
                const double phi = kPi - 0.5 * kPi * double(i) / segments;
                push(corner + Vec2{std::cos(phi), std::sin(phi)} * h, {std::sin(phi), -std::cos(phi)});
            }
            break;
        }
        case TileKind::LaneChangeNarrow:
        case TileKind::LaneChangeWide: {
            const double amp = kind == TileKind::LaneChangeNarrow ? kNarrowShift : kWideShift;
            for (int i = 0; i <= segments; ++i) {
                const double t = double(i) / segments;
                const double s = std::sin(kPi * t);
                push({-h + 2.0 * h * t, amp * s * s}, {2.0 * h, amp * kPi * std::sin(2.0 * kPi * t)});
            }
            break;
        }
        case TileKind::HardTurn:
            c.points = {{0.0, -h}, {0.0, 0.0}, {h, 0.0}};
            break;
    }
    return c;
}

Polyline offset_curve(TileKind kind, const LocalCurve& c, double h, double d) {
    if (kind == TileKind::HardTurn) return {{-d, -h}, {-d, d}, {h, d}};
    Polyline out;
    out.reserve(c.points.size());
    for (std::size_t i = 0; i < c.points.size(); ++i) out.push_back(c.points[i] + c.left[i] * d);
    return out;
}

Polyline transformed(const Polyline& local, Vec2 center, double rot) {
    Polyline out;
    out.reserve(local.size());
    for (const Vec2& p : local) out.push_back(center + rotate(p, rot));
    return out;
}

struct Projection {
    double s = 0.0;  // arc length along polyline
    double distance = std::numeric_limits<double>::infinity();
    Vec2 point;
    Vec2 tangent{1.0, 0.0};
};

Projection project_onto(const Polyline& poly, Vec2 p) {
    Projection best;
    double acc = 0.0;
    for (std::size_t i = 1; i < poly.size(); ++i) {
        const Vec2 a = poly[i - 1], e = poly[i] - a;
        const double len = e.norm();
        if (len == 0.0) continue;
        const double t = std::clamp(dot(p - a, e) / (len * len), 0.0, 1.0);
        const Vec2 q = a + e * t;
        const double d = (p - q).norm();
        if (d < best.distance) best = {acc + t * len, d, q, e * (1.0 / len)};
        acc += len;
    }
    return best;
}

}  // namespace

std::string_view to_string(TileKind kind) { return kKindNames[static_cast<std::size_t>(kind)]; }

TileKind tile_kind_from_string(std::string_view name) {
    for (std::size_t i = 0; i < kKindNames.size(); ++i) {
        if (kKindNames[i] == name) return static_cast<TileKind>(i);
    }
    throw TrackError(TrackError::Code::Parse, "unknown tile kind '" + std::string(name) + "'");
}

Track build_track(std::span<const TilePlacement> layout, const TrackParams& params) {
    using Code = TrackError::Code;
    if (layout.empty()) throw TrackError(Code::EmptyLayout, "track layout is empty");

    Track track;
    track.params_ = params;
    const double size = params.tile_size_m;
    const double h = 0.5 * size;

    std::ptrdiff_t start = -1;
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const TilePlacement& t = layout[i];
        if (t.rotation_deg != 0 && t.rotation_deg != 90 && t.rotation_deg != 180 && t.rotation_deg != 270) {
            throw TrackError(Code::BadRotation, "tile " + std::to_string(i) + " has rotation " +
                                                    std::to_string(t.rotation_deg));
        }
        if (!track.cells_.emplace(track.cell_key(t.col, t.row), i).second) {
            throw TrackError(Code::DuplicateCell, "two tiles share cell (" + std::to_string(t.col) + "," +
                                                      std::to_string(t.row) + ")");
        }
        if (t.kind == TileKind::StartFinish) {
            if (start >= 0) throw TrackError(Code::NoStartFinish, "more than one StartFinish tile");
            start = static_cast<std::ptrdiff_t>(i);
        }
    }
    if (start < 0) throw TrackError(Code::NoStartFinish, "layout has no StartFinish tile");

    // Walk the port chain from the start/finish tile.
    std::vector<Edge> entry(layout.size());
    std::vector<bool> visited(layout.size(), false);
    auto ports_of = [](const TilePlacement& t) {
        auto p = local_ports(t.kind);
        const int q = t.rotation_deg / 90;
        return std::array<Edge, 2>{rotate_edge(p[0], q), rotate_edge(p[1], q)};
    };
    {
        std::size_t cur = static_cast<std::size_t>(start);
        const auto sf_ports = ports_of(layout[cur]);
        entry[cur] = sf_ports[0];
        Edge exit = sf_ports[1];
        visited[cur] = true;
        track.loop_order_.push_back(cur);
        for (;;) {
            const auto [dc, dr] = edge_delta(exit);
            const int col = layout[cur].col + dc, row = layout[cur].row + dr;
            const auto it = track.cells_.find(track.cell_key(col, row));
            if (it == track.cells_.end()) {
                throw TrackError(Code::OpenLoop, "port at cell (" + std::to_string(layout[cur].col) + "," +
                                                     std::to_string(layout[cur].row) + ") leads to an empty cell");
            }
            const std::size_t next = it->second;
            const Edge in = opposite(exit);
            const auto np = ports_of(layout[next]);
            if (np[0] != in && np[1] != in) {
                throw TrackError(Code::OpenLoop, "ports do not meet at cell (" + std::to_string(col) + "," +
                                                     std::to_string(row) + ")");
            }
            if (next == static_cast<std::size_t>(start)) {
                if (in != entry[next]) throw TrackError(Code::OpenLoop, "loop re-enters start tile backwards");
                break;
            }
            if (visited[next]) throw TrackError(Code::OpenLoop, "loop revisits a tile");
            visited[next] = true;
            entry[next] = in;
            exit = np[0] == in ? np[1] : np[0];
            cur = next;
            track.loop_order_.push_back(cur);
        }
    }
    if (track.loop_order_.size() != layout.size()) {
        throw TrackError(Code::OpenLoop, "layout has tiles outside the closed loop");
    }

    const double half_lane = 0.5 * params.lane_width_m;
    const double collider_off = half_lane - params.collider_inset_m;
    track.tiles_.reserve(layout.size());
    for (std::size_t i = 0; i < layout.size(); ++i) {
        const TilePlacement& t = layout[i];
        TileGeometry g;
        g.placement = t;
        g.center = {(t.col + 0.5) * size, (t.row + 0.5) * size};
        const double rot = deg_to_rad(t.rotation_deg);
        const auto world_ports = ports_of(t);
        const bool reversed = world_ports[0] != entry[i];
        g.ports = reversed ? std::array<Edge, 2>{world_ports[1], world_ports[0]} : world_ports;

        const LocalCurve curve = local_curve(t.kind, h, params.curve_segments);
        auto oriented = [&](Polyline p) {
            if (reversed) std::reverse(p.begin(), p.end());
            return p;
        };
        g.centerline = oriented(transformed(curve.points, g.center, rot));
        // Left/right swap under reversal; keep [left, right] in travel order.
        Polyline m_plus = oriented(transformed(offset_curve(t.kind, curve, h, half_lane), g.center, rot));
        Polyline m_minus = oriented(transformed(offset_curve(t.kind, curve, h, -half_lane), g.center, rot));
        Polyline c_plus = oriented(transformed(offset_curve(t.kind, curve, h, collider_off), g.center, rot));
        Polyline c_minus = oriented(transformed(offset_curve(t.kind, curve, h, -collider_off), g.center, rot));
        if (reversed) {
            std::swap(m_plus, m_minus);
            std::swap(c_plus, c_minus);
        }
        g.corridor = m_plus;
        g.corridor.insert(g.corridor.end(), m_minus.rbegin(), m_minus.rend());
        g.markers = {std::move(m_plus), std::move(m_minus)};
        g.colliders = {std::move(c_plus), std::move(c_minus)};
        if (t.kind == TileKind::HardTurn) {
            // Two short 45-degree tape pieces in the inner corner block.
            const Vec2 inner{half_lane, -half_lane};
            const Vec2 diag = Vec2{1.0, -1.0} * (1.0 / std::sqrt(2.0));
            const Vec2 along = Vec2{1.0, 1.0} * (1.0 / std::sqrt(2.0));
            for (double dist : {0.06, 0.12}) {
                const Vec2 mid = inner + diag * dist;
                g.markers.push_back(transformed({mid - along * 0.03, mid + along * 0.03}, g.center, rot));
            }
        }
        for (const auto& p : g.colliders) {
            for (const Vec2& v : p) g.bounds.expand(v);
        }
        g.bounds.expand(g.center - Vec2{h, h});
        g.bounds.expand(g.center + Vec2{h, h});
        track.bounds_.expand(g.bounds.lo);
        track.bounds_.expand(g.bounds.hi);

        const double len = polyline_length(g.centerline);
        track.coins_.push_back({polyline_point_at(g.centerline, 0.5 * len)});
        const Projection mid = project_onto(g.centerline, polyline_point_at(g.centerline, 0.5 * len));
        track.spawn_points_.push_back({mid.point, std::atan2(mid.tangent.y, mid.tangent.x)});
        track.tiles_.push_back(std::move(g));
    }

    const TileGeometry& sf = track.tiles_[static_cast<std::size_t>(start)];
    const double sf_rot = deg_to_rad(sf.placement.rotation_deg);
    track.gate_ = {sf.center + rotate({0.0, -half_lane}, sf_rot), sf.center + rotate({0.0, half_lane}, sf_rot)};
    track.gate_forward_ = rotate({1.0, 0.0}, sf_rot);
    track.build_index();
    return track;
}

void Track::build_index() {
    index_.assign(tiles_.size(), {});
    const double size = params_.tile_size_m;
    const double bucket = size / kBuckets;
    const double reach = 0.5 * std::sqrt(2.0) * bucket + 1e-9;
    const double half_marker = 0.5 * params_.marker_width_m;

    double offset = 0.0;
    for (std::size_t idx : loop_order_) {
        index_[idx].loop_offset = offset;
        offset += polyline_length(tiles_[idx].centerline);
    }
    loop_length_ = offset;

    for (std::size_t ti = 0; ti < tiles_.size(); ++ti) {
        const TileGeometry& g = tiles_[ti];
        TileIndex& idx = index_[ti];
        const std::uint32_t first_marker = static_cast<std::uint32_t>(marker_segments_.size());
        for (const auto& m : g.markers) {
            for (std::size_t k = 1; k < m.size(); ++k) marker_segments_.push_back({m[k - 1], m[k]});
        }
        const std::uint32_t last_marker = static_cast<std::uint32_t>(marker_segments_.size());
        idx.collider_begin = collider_segments_.size();
        for (const auto& c : g.colliders) {
            for (std::size_t k = 1; k < c.size(); ++k) collider_segments_.push_back({c[k - 1], c[k]});
        }
        idx.collider_end = collider_segments_.size();

        const Vec2 origin = g.center - Vec2{0.5 * size, 0.5 * size};
        idx.buckets.resize(kBuckets * kBuckets);
        for (int by = 0; by < kBuckets; ++by) {
            for (int bx = 0; bx < kBuckets; ++bx) {
                Bucket& b = idx.buckets[by * kBuckets + bx];
                const Vec2 c = origin + Vec2{(bx + 0.5) * bucket, (by + 0.5) * bucket};
                for (std::uint32_t s = first_marker; s < last_marker; ++s) {
                    if (point_segment_distance(c, marker_segments_[s].a, marker_segments_[s].b) <= half_marker + reach) {
                        b.marker_segments.push_back(s);
                    }
                }
                const auto& poly = g.corridor;
                for (std::size_t k = 0; k < poly.size() && !b.has_corridor_edge; ++k) {
                    const Vec2 a = poly[k], e = poly[(k + 1) % poly.size()];
                    if (point_segment_distance(c, a, e) <= reach) b.has_corridor_edge = true;
                }
                b.center_inside = point_in_polygon(c, poly);
            }
        }
    }
}

std::vector<TilePlacement> Track::layout() const {
    std::vector<TilePlacement> out;
    out.reserve(tiles_.size());
    for (const auto& t : tiles_) out.push_back(t.placement);
    return out;
}

const TileGeometry* Track::tile_at(Vec2 p) const {
    const double size = params_.tile_size_m;
    const int col = static_cast<int>(std::floor(p.x / size));
    const int row = static_cast<int>(std::floor(p.y / size));
    const auto it = cells_.find(cell_key(col, row));
    return it == cells_.end() ? nullptr : &tiles_[it->second];
}

const Track::Bucket& Track::bucket_for(std::size_t tile, Vec2 p) const {
    const TileGeometry& g = tiles_[tile];
    const double size = params_.tile_size_m;
    const Vec2 local = p - (g.center - Vec2{0.5 * size, 0.5 * size});
    const int bx = std::clamp(static_cast<int>(local.x / size * kBuckets), 0, kBuckets - 1);
    const int by = std::clamp(static_cast<int>(local.y / size * kBuckets), 0, kBuckets - 1);
    return index_[tile].buckets[by * kBuckets + bx];
}

SurfaceClass Track::classify_in_tile(std::size_t tile, Vec2 p) const {
    const Bucket& b = bucket_for(tile, p);
    const double half_marker = 0.5 * params_.marker_width_m;
    for (std::uint32_t s : b.marker_segments) {
        if (point_segment_distance(p, marker_segments_[s].a, marker_segments_[s].b) <= half_marker) {
            return SurfaceClass::Marker;
        }
    }
    const bool inside = b.has_corridor_edge ? point_in_polygon(p, tiles_[tile].corridor) : b.center_inside;
    return inside ? SurfaceClass::Asphalt : SurfaceClass::OffTrack;
}

SurfaceClass Track::sample_surface(Vec2 p) const {
    const TileGeometry* g = tile_at(p);
    SurfaceClass best = SurfaceClass::OffTrack;
    if (g != nullptr) {
        best = classify_in_tile(static_cast<std::size_t>(g - tiles_.data()), p);
        if (best != SurfaceClass::OffTrack) return best;
    }
    // Seam vertices can land an ulp off the cell edge, so a point on a seam
    // is retried a hair inside each neighbouring cell.
    constexpr double kSeam = 1e-9;
    for (Vec2 d : {Vec2{-kSeam, 0.0}, Vec2{kSeam, 0.0}, Vec2{0.0, -kSeam}, Vec2{0.0, kSeam}}) {
        const TileGeometry* n = tile_at(p + d);
        if (n == nullptr || n == g) continue;
        best = classify_in_tile(static_cast<std::size_t>(n - tiles_.data()), p + d);
        if (best != SurfaceClass::OffTrack) return best;
    }
    return best;
}

double Track::raycast_collider(Vec2 origin, Vec2 dir, double max_range) const {
    Aabb ray;
    ray.expand(origin);
    ray.expand(origin + dir * max_range);
    double best = max_range;
    for (std::size_t ti = 0; ti < tiles_.size(); ++ti) {
        if (!tiles_[ti].bounds.overlaps(ray)) continue;
        for (std::size_t s = index_[ti].collider_begin; s < index_[ti].collider_end; ++s) {
            if (auto t = ray_segment_hit(origin, dir, collider_segments_[s].a, collider_segments_[s].b)) {
                best = std::min(best, *t);
            }
        }
    }
    return best;
}

std::optional<double> Track::first_collider_crossing(Vec2 p0, Vec2 p1) const {
    Aabb box;
    box.expand(p0);
    box.expand(p1);
    std::optional<double> best;
    for (std::size_t ti = 0; ti < tiles_.size(); ++ti) {
        if (!tiles_[ti].bounds.overlaps(box)) continue;
        for (std::size_t s = index_[ti].collider_begin; s < index_[ti].collider_end; ++s) {
            if (auto f = segment_crossing(p0, p1, collider_segments_[s].a, collider_segments_[s].b)) {
                if (!best || *f < *best) best = f;
            }
        }
    }
    return best;
}

double Track::collider_clearance(Vec2 a, Vec2 b) const {
    constexpr double kCap = 0.1;
    Aabb box;
    box.expand(a - Vec2{kCap, kCap});
    box.expand(b + Vec2{kCap, kCap});
    box.expand(a + Vec2{kCap, kCap});
    box.expand(b - Vec2{kCap, kCap});
    double best = kCap;
    for (std::size_t ti = 0; ti < tiles_.size(); ++ti) {
        if (!tiles_[ti].bounds.overlaps(box)) continue;
        for (std::size_t s = index_[ti].collider_begin; s < index_[ti].collider_end; ++s) {
            best = std::min(best, segment_segment_distance(a, b, collider_segments_[s].a, collider_segments_[s].b));
        }
    }
    return best;
}

Pose Track::spawn_pose(int spawn_index, double heading_deg) const {
    if (spawn_index < 0 || static_cast<std::size_t>(spawn_index) >= tiles_.size()) {
        throw TrackError(TrackError::Code::BadIndex, "spawn index " + std::to_string(spawn_index) +
                                                         " out of range for " + std::to_string(tiles_.size()) +
                                                         "-tile track");
    }
    return {tiles_[static_cast<std::size_t>(spawn_index)].center, deg_to_rad(heading_deg)};
}

double Track::loop_progress(Vec2 p) const {
    const TileGeometry* g = tile_at(p);
    if (g == nullptr) return -1.0;
    const std::size_t ti = static_cast<std::size_t>(g - tiles_.data());
    return index_[ti].loop_offset + project_onto(g->centerline, p).s;
}

double Track::lateral_offset(Vec2 p) const {
    const TileGeometry* g = tile_at(p);
    if (g == nullptr) return std::numeric_limits<double>::quiet_NaN();
    const Projection pr = project_onto(g->centerline, p);
    return cross(pr.tangent, p - pr.point);
}

Vec2 Track::travel_direction(Vec2 p) const {
    const TileGeometry* g = tile_at(p);
    if (g == nullptr) return {1.0, 0.0};
    return project_onto(g->centerline, p).tangent;
}

std::vector<TilePlacement> parse_layout(std::string_view text) {
    std::vector<TilePlacement> out;
    std::istringstream in{std::string(text)};
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
        std::istringstream fields(line);
        std::string kind;
        if (!(fields >> kind)) continue;
        TilePlacement t;
        t.kind = tile_kind_from_string(kind);
        std::string extra;
        if (!(fields >> t.col >> t.row >> t.rotation_deg) || (fields >> extra)) {
            throw TrackError(TrackError::Code::Parse, "layout line " + std::to_string(line_no) +
                                                          ": expected `kind col row rotation`");
        }
        out.push_back(t);
    }
    return out;
}

std::string format_layout(std::span<const TilePlacement> layout) {
    std::string out;
    for (const auto& t : layout) {
        out += std::string(to_string(t.kind)) + ' ' + std::to_string(t.col) + ' ' + std::to_string(t.row) + ' ' +
               std::to_string(t.rotation_deg) + '\n';
    }
    return out;
}

namespace {
std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw TrackError(TrackError::Code::Parse, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}
}  // namespace

std::vector<TilePlacement> load_layout(const std::filesystem::path& path) { return parse_layout(read_text(path)); }

std::vector<TilePlacement> ring_layout(int cols, int rows) {
    if (cols < 2 || rows < 2 || (cols < 3 && rows < 3)) {
        throw TrackError(TrackError::Code::EmptyLayout, "ring needs at least 3x2 cells");
    }
    std::vector<TilePlacement> out;
    out.push_back({TileKind::SweepTurn, 0, 0, 90});
    for (int c = 1; c < cols - 1; ++c) {
        out.push_back({c == 1 ? TileKind::StartFinish : TileKind::Straight, c, 0, 0});
    }
    out.push_back({TileKind::SweepTurn, cols - 1, 0, 180});
    for (int r = 1; r < rows - 1; ++r) {
        const bool sf = cols < 3 && r == 1;
        out.push_back({sf ? TileKind::StartFinish : TileKind::Straight, cols - 1, r, 90});
    }
    out.push_back({TileKind::SweepTurn, cols - 1, rows - 1, 270});
    for (int c = cols - 2; c >= 1; --c) out.push_back({TileKind::Straight, c, rows - 1, 0});
    out.push_back({TileKind::SweepTurn, 0, rows - 1, 0});
    for (int r = rows - 2; r >= 1; --r) out.push_back({TileKind::Straight, 0, r, 90});
    return out;
}

std::vector<TilePlacement> path_layout(std::span<const std::pair<int, int>> cells) {
    const std::size_t n = cells.size();
    if (n < 4) throw TrackError(TrackError::Code::EmptyLayout, "path needs at least 4 cells");
    auto edge_to = [](std::pair<int, int> from, std::pair<int, int> to) {
        const int dc = to.first - from.first, dr = to.second - from.second;
        if (dc == 1 && dr == 0) return 0;
        if (dc == 0 && dr == 1) return 1;
        if (dc == -1 && dr == 0) return 2;
        if (dc == 0 && dr == -1) return 3;
        throw TrackError(TrackError::Code::OpenLoop, "path cells are not adjacent");
    };
    std::vector<TilePlacement> out;
    for (std::size_t i = 0; i < n; ++i) {
        const int a = edge_to(cells[i], cells[(i + n - 1) % n]);
        const int b = edge_to(cells[i], cells[(i + 1) % n]);
        const auto [col, row] = cells[i];
        if ((a + 2) % 4 == b) {
            if (i == 0) {
                out.push_back({TileKind::StartFinish, col, row, a % 2 == 0 ? 0 : 90});
            } else {
                out.push_back({TileKind::Straight, col, row, a % 2 == 0 ? 0 : 90});
            }
            continue;
        }
        if (i == 0) throw TrackError(TrackError::Code::NoStartFinish, "first path cell must be straight");
        if (a == b) throw TrackError(TrackError::Code::OpenLoop, "path reverses");
        const int lo = ((b - a + 4) % 4 == 1) ? a : b;
        out.push_back({TileKind::SweepTurn, col, row, ((lo + 1) % 4) * 90});
    }
    return out;
}

SpawnSpec parse_spawn(std::string_view text) {
    std::istringstream in{std::string(text)};
    SpawnSpec s;
    if (!(in >> s.spawn_index)) throw TrackError(TrackError::Code::Parse, "spawn file: missing spawn index");
    if (!(in >> s.heading_deg)) s.heading_deg = 0.0;
    return s;
}

SpawnSpec load_spawn(const std::filesystem::path& path) { return parse_spawn(read_text(path)); }

std::string format_spawn(const SpawnSpec& spec) {
    std::ostringstream out;
    out << spec.spawn_index << '\n' << spec.heading_deg << '\n';
    return out.str();
}

}  // namespace laneforge
