#include "rlomm/roadnet.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <limits>
#include <sstream>

namespace rlomm {

namespace {

std::int64_t cell_key(int row, int col) {
    return (std::int64_t(row) << 32) ^ std::uint32_t(col);
}

double polyline_length_m(const RoadSegment& seg) {
    double len = 0.0;
    for (std::size_t i = 1; i < seg.polyline.size(); ++i)
        len += haversine_m(seg.polyline[i - 1], seg.polyline[i]);
    return len;
}

}  // namespace

double point_segment_distance_m(const GeoPoint& p, const RoadSegment& seg,
                                const GridSpec& ref) {
    const double px = ref.east_offset_m(p);
    const double py = ref.north_offset_m(p);
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 1; i < seg.polyline.size(); ++i) {
        const double ax = ref.east_offset_m(seg.polyline[i - 1]);
        const double ay = ref.north_offset_m(seg.polyline[i - 1]);
        const double bx = ref.east_offset_m(seg.polyline[i]);
        const double by = ref.north_offset_m(seg.polyline[i]);
        const double dx = bx - ax, dy = by - ay;
        const double len2 = dx * dx + dy * dy;
        double t = 0.0;
        if (len2 > 0.0) t = std::clamp(((px - ax) * dx + (py - ay) * dy) / len2, 0.0, 1.0);
        const double cx = ax + t * dx, cy = ay + t * dy;
        best = std::min(best, std::hypot(px - cx, py - cy));
    }
    return best;
}

LinkConnectionGraph LinkConnectionGraph::build(std::vector<RoadSegment> segments) {
    if (segments.empty()) throw EmptyNetwork("road network has no segments");
    std::sort(segments.begin(), segments.end(),
              [](const RoadSegment& a, const RoadSegment& b) { return a.id < b.id; });
    for (std::size_t i = 0; i < segments.size(); ++i) {
        if (i > 0 && segments[i].id == segments[i - 1].id)
            throw DuplicateId("duplicate segment id " + std::to_string(segments[i].id));
        if (segments[i].id != int(i))
            throw DuplicateId("segment ids must be dense in [0, n)");
        if (segments[i].polyline.size() < 2)
            throw std::invalid_argument("segment polyline needs at least 2 points");
    }

    LinkConnectionGraph g;
    g.segments_ = std::move(segments);
    const int n = g.size();
    g.out_.resize(n);
    g.in_.resize(n);

    double minlat = 1e9, minlon = 1e9, maxlat = -1e9, maxlon = -1e9, total_len = 0.0;
    for (const auto& s : g.segments_) {
        for (const auto& p : s.polyline) {
            minlat = std::min(minlat, p.lat);
            minlon = std::min(minlon, p.lon);
            maxlat = std::max(maxlat, p.lat);
            maxlon = std::max(maxlon, p.lon);
        }
        total_len += polyline_length_m(s);
    }
    g.bbox_min_ = {minlat, minlon, 0};
    g.bbox_max_ = {maxlat, maxlon, 0};
    g.mean_length_m_ = total_len / n;

    const bool have_nodes = std::all_of(
        g.segments_.begin(), g.segments_.end(),
        [](const RoadSegment& s) { return s.from_node >= 0 && s.to_node >= 0; });

    if (have_nodes) {
        std::unordered_map<std::int64_t, std::vector<int>> by_from;
        for (const auto& s : g.segments_) by_from[s.from_node].push_back(s.id);
        for (const auto& s : g.segments_) {
            auto it = by_from.find(s.to_node);
            if (it == by_from.end()) continue;
            for (int j : it->second)
                if (j != s.id) g.out_[s.id].push_back(j);
        }
    } else {
        // Snap endpoints onto a 0.5 m hash; neighbors within tolerance match.
        constexpr double kTol = 0.5;
        GridSpec snap(g.bbox_min_, kTol, 1, 1);
        std::unordered_map<std::int64_t, std::vector<int>> starts;
        auto key_of = [&](const GeoPoint& p) {
            return cell_key(int(std::floor(snap.north_offset_m(p) / kTol)),
                            int(std::floor(snap.east_offset_m(p) / kTol)));
        };
        for (const auto& s : g.segments_) starts[key_of(s.start())].push_back(s.id);
        for (const auto& s : g.segments_) {
            const double ex = snap.east_offset_m(s.end());
            const double ny = snap.north_offset_m(s.end());
            const int r0 = int(std::floor(ny / kTol)), c0 = int(std::floor(ex / kTol));
            for (int dr = -1; dr <= 1; ++dr)
                for (int dc = -1; dc <= 1; ++dc) {
                    auto it = starts.find(cell_key(r0 + dr, c0 + dc));
                    if (it == starts.end()) continue;
                    for (int j : it->second) {
                        if (j == s.id) continue;
                        const auto& t = g.segments_[j].start();
                        const double dx = snap.east_offset_m(t) - ex;
                        const double dy = snap.north_offset_m(t) - ny;
                        if (std::hypot(dx, dy) <= kTol) g.out_[s.id].push_back(j);
                    }
                }
        }
    }

    for (auto& adj : g.out_) {
        std::sort(adj.begin(), adj.end());
        adj.erase(std::unique(adj.begin(), adj.end()), adj.end());
    }
    for (int u = 0; u < n; ++u)
        for (int v : g.out_[u]) g.in_[v].push_back(u);
    for (auto& adj : g.in_) std::sort(adj.begin(), adj.end());

    g.build_index();
    return g;
}

void LinkConnectionGraph::build_index() {
    // Cell side scaled to the network so lists stay short.
    index_cell_m_ = std::max(25.0, mean_length_m_ / 2.0);
    const double pad = index_cell_m_;
    GeoPoint lo = {bbox_min_.lat - pad / kMetersPerDegLat,
                   bbox_min_.lon - pad / kMetersPerDegLat, 0};
    index_spec_ = GridSpec(lo, index_cell_m_, 1, 1);
    for (const auto& s : segments_) {
        std::int64_t prev_key = std::numeric_limits<std::int64_t>::min();
        auto insert_at = [&](const GeoPoint& p) {
            const int row = int(std::floor(index_spec_.north_offset_m(p) / index_cell_m_));
            const int col = int(std::floor(index_spec_.east_offset_m(p) / index_cell_m_));
            const auto key = cell_key(row, col);
            if (key == prev_key) return;
            prev_key = key;
            auto& lst = index_cells_[key];
            if (lst.empty() || lst.back() != s.id) lst.push_back(s.id);
        };
        for (std::size_t i = 1; i < s.polyline.size(); ++i) {
            const auto& a = s.polyline[i - 1];
            const auto& b = s.polyline[i];
            const double len = haversine_m(a, b);
            const int steps = std::max(1, int(std::ceil(len / (index_cell_m_ / 2.0))));
            for (int k = 0; k <= steps; ++k) {
                const double t = double(k) / steps;
                insert_at({a.lat + t * (b.lat - a.lat), a.lon + t * (b.lon - a.lon), 0});
            }
        }
    }
}

const RoadSegment& LinkConnectionGraph::segment(int id) const {
    check_id(id);
    return segments_[id];
}

const std::vector<int>& LinkConnectionGraph::out_edges(int id) const {
    check_id(id);
    return out_[id];
}

const std::vector<int>& LinkConnectionGraph::in_edges(int id) const {
    check_id(id);
    return in_[id];
}

void LinkConnectionGraph::check_id(int id) const {
    if (id < 0 || id >= size()) throw UnknownSegment("segment id " + std::to_string(id));
}

CandidateSet LinkConnectionGraph::candidates(const GeoPoint& p, int n_c) const {
    n_c = std::min(n_c, size());
    const int row0 = int(std::floor(index_spec_.north_offset_m(p) / index_cell_m_));
    const int col0 = int(std::floor(index_spec_.east_offset_m(p) / index_cell_m_));

    std::vector<Candidate> found;
    std::vector<char> seen(segments_.size(), 0);
    auto worst = [&]() {
        return int(found.size()) < n_c ? std::numeric_limits<double>::infinity()
                                       : found.back().distance_m;
    };
    auto push = [&](int id) {
        if (seen[id]) return;
        seen[id] = 1;
        const double d = point_segment_distance_m(p, segments_[id], index_spec_);
        Candidate c{id, d};
        auto pos = std::lower_bound(found.begin(), found.end(), c,
                                    [](const Candidate& a, const Candidate& b) {
                                        return a.distance_m < b.distance_m ||
                                               (a.distance_m == b.distance_m &&
                                                a.segment_id < b.segment_id);
                                    });
        found.insert(pos, c);
        if (int(found.size()) > n_c) found.pop_back();
    };

    // Ring expansion: ring r only contains geometry at distance
    // >= (r-1)*cell from p, so stop once that bound beats the worst kept.
    const int extent_cells =
        2 + int(std::ceil(std::max(index_spec_.north_offset_m(bbox_max_),
                                   index_spec_.east_offset_m(bbox_max_)) /
                          index_cell_m_));
    const int max_ring = extent_cells + std::abs(row0) + std::abs(col0);
    for (int r = 0; r <= max_ring; ++r) {
        if (int(found.size()) >= n_c && double(r - 1) * index_cell_m_ > worst()) break;
        for (int dr = -r; dr <= r; ++dr)
            for (int dc = -r; dc <= r; ++dc) {
                if (std::max(std::abs(dr), std::abs(dc)) != r) continue;
                auto it = index_cells_.find(cell_key(row0 + dr, col0 + dc));
                if (it == index_cells_.end()) continue;
                for (int id : it->second) push(id);
            }
    }
    return found;
}

std::optional<int> LinkConnectionGraph::hops(int u, int v, int cutoff) const {
    check_id(u);
    check_id(v);
    if (u == v) return 0;
    std::vector<int> dist(segments_.size(), -1);
    std::deque<int> queue{u};
    dist[u] = 0;
    while (!queue.empty()) {
        const int cur = queue.front();
        queue.pop_front();
        if (dist[cur] >= cutoff) continue;
        for (int nxt : out_[cur]) {
            if (dist[nxt] >= 0) continue;
            dist[nxt] = dist[cur] + 1;
            if (nxt == v) return dist[nxt];
            queue.push_back(nxt);
        }
    }
    return std::nullopt;
}

std::optional<int> LinkConnectionGraph::connectivity_delta(int u, int v, int cutoff) const {
    auto h = hops(u, v, cutoff);
    if (!h) return std::nullopt;
    return std::max(1, *h);
}

std::vector<SegmentFeatures> segment_features(const LinkConnectionGraph& graph,
                                              const GridSpec& spec) {
    std::vector<SegmentFeatures> raw(graph.size());
    for (int i = 0; i < graph.size(); ++i) {
        const auto& s = graph.segment(i);
        const GridCell cs = spec.cell_of(s.start());
        const GridCell ce = spec.cell_of(s.end());
        raw[i] = {double(cs.row),  double(cs.col),  double(ce.row),  double(ce.col),
                  s.start().lat,   s.start().lon,   s.end().lat,     s.end().lon};
    }
    for (int f = 0; f < 8; ++f) {
        double lo = raw[0][f], hi = raw[0][f];
        for (const auto& r : raw) {
            lo = std::min(lo, r[f]);
            hi = std::max(hi, r[f]);
        }
        const double range = hi - lo;
        for (auto& r : raw) r[f] = range > 0.0 ? (r[f] - lo) / range : 0.0;
    }
    return raw;
}

std::vector<RoadSegment> load_road_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open road file: " + path);
    std::string line;
    std::getline(in, line);  // header
    std::vector<RoadSegment> out;
    int lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        RoadSegment seg;
        std::size_t p1 = line.find(',');
        std::size_t p2 = line.find(',', p1 + 1);
        std::size_t p3 = line.find(',', p2 + 1);
        if (p1 == std::string::npos || p2 == std::string::npos || p3 == std::string::npos)
            throw std::runtime_error("bad road csv at line " + std::to_string(lineno));
        seg.id = std::stoi(line.substr(0, p1));
        const std::string from = line.substr(p1 + 1, p2 - p1 - 1);
        const std::string to = line.substr(p2 + 1, p3 - p2 - 1);
        if (!from.empty()) seg.from_node = std::stoll(from);
        if (!to.empty()) seg.to_node = std::stoll(to);
        std::string wkt = line.substr(p3 + 1);
        const auto open = wkt.find('(');
        const auto close = wkt.rfind(')');
        if (open == std::string::npos || close == std::string::npos || close <= open)
            throw std::runtime_error("bad LINESTRING at line " + std::to_string(lineno));
        std::stringstream coords(wkt.substr(open + 1, close - open - 1));
        std::string pair;
        while (std::getline(coords, pair, ',')) {
            std::stringstream ps(pair);
            GeoPoint pt;
            ps >> pt.lon >> pt.lat;
            seg.polyline.push_back(pt);
        }
        if (seg.polyline.size() < 2)
            throw std::runtime_error("polyline too short at line " + std::to_string(lineno));
        out.push_back(std::move(seg));
    }
    return out;
}

void save_road_csv(const std::string& path, const std::vector<RoadSegment>& segments) {
    std::ofstream out(path);
    out << "seg_id,from_node,to_node,wkt\n";
    out.precision(10);
    for (const auto& s : segments) {
        out << s.id << ',';
        if (s.from_node >= 0) out << s.from_node;
        out << ',';
        if (s.to_node >= 0) out << s.to_node;
        out << ",LINESTRING(";
        for (std::size_t i = 0; i < s.polyline.size(); ++i) {
            if (i) out << ", ";
            out << s.polyline[i].lon << ' ' << s.polyline[i].lat;
        }
        out << ")\n";
    }
}

}  // namespace rlomm
