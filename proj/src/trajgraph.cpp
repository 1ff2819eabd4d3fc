#include "rlomm/trajgraph.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

namespace rlomm {

namespace {
std::int64_t edge_key(int from, int to) {
    return (std::int64_t(from) << 32) ^ std::uint32_t(to);
}
}  // namespace

int TrajectoryTransitionGraph::intern(const GridCell& c) {
    auto [it, inserted] = index_.try_emplace(c, int(nodes_.size()));
    if (inserted) nodes_.push_back(c);
    return it->second;
}

void TrajectoryTransitionGraph::add_trajectory(const Trajectory& traj,
                                               const GridSpec& spec) {
    int prev = -1;
    for (const auto& p : traj) {
        const int cur = intern(spec.cell_of(p));
        ++point_count_;
        if (prev >= 0 && prev != cur) ++edges_[edge_key(prev, cur)];
        prev = cur;
    }
}

std::int64_t TrajectoryTransitionGraph::total_edge_weight() const {
    std::int64_t total = 0;
    for (const auto& [k, w] : edges_) total += w;
    return total;
}

std::vector<std::vector<int>> TrajectoryTransitionGraph::in_neighbors() const {
    std::vector<std::vector<int>> in(nodes_.size());
    for (const auto& [k, w] : edges_) {
        const int from = int(k >> 32);
        const int to = int(std::uint32_t(k & 0xffffffff));
        in[to].push_back(from);
    }
    for (auto& v : in) std::sort(v.begin(), v.end());
    return in;
}

bool operator==(const TrajectoryTransitionGraph& a, const TrajectoryTransitionGraph& b) {
    if (a.point_count_ != b.point_count_) return false;
    // Node identity is the cell set, not insertion order.
    std::set<std::pair<int, int>> an, bn;
    for (const auto& c : a.nodes_) an.insert({c.row, c.col});
    for (const auto& c : b.nodes_) bn.insert({c.row, c.col});
    if (an != bn) return false;
    auto canon = [](const TrajectoryTransitionGraph& g) {
        std::set<std::tuple<int, int, int, int, std::int64_t>> out;
        for (const auto& [k, w] : g.edges_) {
            const auto& f = g.nodes_[int(k >> 32)];
            const auto& t = g.nodes_[int(std::uint32_t(k & 0xffffffff))];
            out.insert({f.row, f.col, t.row, t.col, w});
        }
        return out;
    };
    return canon(a) == canon(b);
}

TrajectoryTransitionGraph build_transition_graph(std::span<const Trajectory> corpus,
                                                 const GridSpec& spec) {
    TrajectoryTransitionGraph g;
    for (const auto& traj : corpus) g.add_trajectory(traj, spec);
    return g;
}

void update_transition_graph(TrajectoryTransitionGraph& graph, const Trajectory& traj,
                             const GridSpec& spec) {
    graph.add_trajectory(traj, spec);
}

RoadToGridMapping RoadToGridMapping::build(const GridSpec& spec,
                                           const LinkConnectionGraph& roads) {
    RoadToGridMapping m;
    const double step = spec.cell_m() / 2.0;
    for (const auto& seg : roads.segments()) {
        GridCell prev{-1, -1};
        auto visit = [&](const GeoPoint& p) {
            const GridCell c = spec.cell_of(p);
            if (c == prev) return;
            prev = c;
            auto& lst = m.cells_[c];
            if (std::find(lst.begin(), lst.end(), seg.id) == lst.end())
                lst.push_back(seg.id);
        };
        for (std::size_t i = 1; i < seg.polyline.size(); ++i) {
            const auto& a = seg.polyline[i - 1];
            const auto& b = seg.polyline[i];
            const int steps = std::max(1, int(std::ceil(haversine_m(a, b) / step)));
            for (int k = 0; k <= steps; ++k) {
                const double t = double(k) / steps;
                visit({a.lat + t * (b.lat - a.lat), a.lon + t * (b.lon - a.lon), 0});
            }
        }
    }
    return m;
}

const std::vector<int>& RoadToGridMapping::segments_at(const GridCell& c) const {
    auto it = cells_.find(c);
    return it == cells_.end() ? empty_ : it->second;
}

std::vector<std::vector<double>> initial_grid_reps(
    const TrajectoryTransitionGraph& graph, const RoadToGridMapping& mapping,
    const std::vector<std::vector<double>>& road_reps) {
    if (road_reps.empty()) throw DimensionMismatch("road_reps must cover all segments");
    const std::size_t d = road_reps.front().size();
    std::vector<std::vector<double>> out(graph.node_count(), std::vector<double>(d, 0.0));
    for (int i = 0; i < graph.node_count(); ++i) {
        const auto& segs = mapping.segments_at(graph.cell(i));
        if (segs.empty()) continue;
        for (int s : segs) {
            if (road_reps[s].size() != d)
                throw DimensionMismatch("inconsistent road rep widths");
            for (std::size_t j = 0; j < d; ++j) out[i][j] += road_reps[s][j];
        }
        for (std::size_t j = 0; j < d; ++j) out[i][j] /= double(segs.size());
    }
    return out;
}

void dump_transition_graph_csv(const TrajectoryTransitionGraph& graph,
                               const std::string& path) {
    std::ofstream out(path);
    out << "from_row,from_col,to_row,to_col,weight\n";
    std::vector<std::tuple<int, int, int, int, std::int64_t>> rows;
    for (const auto& [k, w] : graph.edges()) {
        const auto& f = graph.cell(int(k >> 32));
        const auto& t = graph.cell(int(std::uint32_t(k & 0xffffffff)));
        rows.push_back({f.row, f.col, t.row, t.col, w});
    }
    std::sort(rows.begin(), rows.end());
    for (const auto& [fr, fc, tr, tc, w] : rows)
        out << fr << ',' << fc << ',' << tr << ',' << tc << ',' << w << '\n';
}

}  // namespace rlomm
