#pragma once

#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "rlomm/geo.hpp"
#include "rlomm/roadnet.hpp"

namespace rlomm {

struct DimensionMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

using Trajectory = std::vector<GeoPoint>;

/// Directed weighted graph over the grid cells visited by a corpus; edge
/// weights count consecutive-point transitions between distinct cells.
class TrajectoryTransitionGraph {
public:
    int node_count() const { return int(nodes_.size()); }
    std::int64_t point_count() const { return point_count_; }

    /// Dense node index of a cell, or -1 when the cell was never visited.
    int node_of(const GridCell& c) const {
        auto it = index_.find(c);
        return it == index_.end() ? -1 : it->second;
    }
    const GridCell& cell(int node) const { return nodes_[node]; }
    const std::vector<GridCell>& nodes() const { return nodes_; }

    /// (from_node, to_node) -> transition count.
    const std::unordered_map<std::int64_t, std::int64_t>& edges() const { return edges_; }
    std::int64_t total_edge_weight() const;

    /// In-neighbor node lists (deduplicated), aligned with node indices.
    std::vector<std::vector<int>> in_neighbors() const;

    void add_trajectory(const Trajectory& traj, const GridSpec& spec);

    friend bool operator==(const TrajectoryTransitionGraph& a,
                           const TrajectoryTransitionGraph& b);

private:
    std::vector<GridCell> nodes_;
    std::unordered_map<GridCell, int, GridCellHash> index_;
    std::unordered_map<std::int64_t, std::int64_t> edges_;
    std::int64_t point_count_ = 0;

    int intern(const GridCell& c);
};

TrajectoryTransitionGraph build_transition_graph(std::span<const Trajectory> corpus,
                                                 const GridSpec& spec);

/// Incremental update; result is identical to rebuilding over corpus + traj.
void update_transition_graph(TrajectoryTransitionGraph& graph, const Trajectory& traj,
                             const GridSpec& spec);

/// Sparse road-to-grid mapping: for each grid cell intersected by road
/// geometry, the deduplicated list of segment ids passing through it.
/// Rasterized by sampling each polyline at cell/2 spacing plus vertices.
class RoadToGridMapping {
public:
    static RoadToGridMapping build(const GridSpec& spec, const LinkConnectionGraph& roads);

    const std::vector<int>& segments_at(const GridCell& c) const;

private:
    std::unordered_map<GridCell, std::vector<int>, GridCellHash> cells_;
    std::vector<int> empty_;
};

/// Mean of road_reps over the segments mapped to each graph node; nodes with
/// no intersecting road get the zero vector.
std::vector<std::vector<double>> initial_grid_reps(
    const TrajectoryTransitionGraph& graph, const RoadToGridMapping& mapping,
    const std::vector<std::vector<double>>& road_reps);

/// Inspection dump: from_row,from_col,to_row,to_col,weight.
void dump_transition_graph_csv(const TrajectoryTransitionGraph& graph,
                               const std::string& path);

}  // namespace rlomm
