#pragma once

#include <array>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "rlomm/geo.hpp"

namespace rlomm {

struct DuplicateId : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct EmptyNetwork : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct UnknownSegment : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// One directed road segment with its polyline geometry.
struct RoadSegment {
    int id = -1;
    std::vector<GeoPoint> polyline;  // >= 2 points, first = start, last = end
    // Optional topology ids from the input file; -1 when absent.
    std::int64_t from_node = -1;
    std::int64_t to_node = -1;

    const GeoPoint& start() const { return polyline.front(); }
    const GeoPoint& end() const { return polyline.back(); }
};

struct Candidate {
    int segment_id = -1;
    double distance_m = 0.0;
};
using CandidateSet = std::vector<Candidate>;

/// Minimum distance from p to the polyline of seg, in the local projection
/// induced by ref (clamped projection onto each sub-segment).
double point_segment_distance_m(const GeoPoint& p, const RoadSegment& seg, const GridSpec& ref);

/// The directed link connection graph over road segments: an edge i -> j
/// exists iff segment i's end node coincides with segment j's start node.
/// Immutable after build; all queries are pure.
class LinkConnectionGraph {
public:
    /// Adjacency comes from from_node/to_node ids when every segment carries
    /// them, otherwise from endpoint snapping within 0.5 m.
    static LinkConnectionGraph build(std::vector<RoadSegment> segments);

    int size() const { return int(segments_.size()); }
    const RoadSegment& segment(int id) const;
    const std::vector<RoadSegment>& segments() const { return segments_; }
    const std::vector<int>& out_edges(int id) const;
    const std::vector<int>& in_edges(int id) const;

    /// The n_c nearest segments to p, ascending by distance, ties broken by
    /// lower id. Returns fewer when the network is smaller than n_c.
    CandidateSet candidates(const GeoPoint& p, int n_c) const;

    /// Connectivity degree: max(1, directed hop count u -> v), or nullopt
    /// when no path exists within cutoff hops.
    std::optional<int> connectivity_delta(int u, int v, int cutoff) const;

    /// Unclamped directed hop count (u == v -> 0); nullopt beyond cutoff.
    std::optional<int> hops(int u, int v, int cutoff) const;

    double mean_segment_length_m() const { return mean_length_m_; }

    GeoPoint bbox_min() const { return bbox_min_; }
    GeoPoint bbox_max() const { return bbox_max_; }

private:
    std::vector<RoadSegment> segments_;
    std::vector<std::vector<int>> out_;
    std::vector<std::vector<int>> in_;
    double mean_length_m_ = 0.0;
    GeoPoint bbox_min_{}, bbox_max_{};

    // Uniform spatial hash for candidate retrieval.
    GridSpec index_spec_;
    std::unordered_map<std::int64_t, std::vector<int>> index_cells_;
    double index_cell_m_ = 0.0;

    void build_index();
    void check_id(int id) const;
};

/// Per-segment feature 8-vector: grid (row, col) of start and end plus raw
/// (lat, lon) of start and end, each min-max normalized to [0,1] over the
/// network. A degenerate (constant) range normalizes to 0.
using SegmentFeatures = std::array<double, 8>;
std::vector<SegmentFeatures> segment_features(const LinkConnectionGraph& graph,
                                              const GridSpec& spec);

/// Reads `seg_id,from_node,to_node,wkt` CSV; wkt is LINESTRING(lon lat, ...).
std::vector<RoadSegment> load_road_csv(const std::string& path);
void save_road_csv(const std::string& path, const std::vector<RoadSegment>& segments);

}  // namespace rlomm
