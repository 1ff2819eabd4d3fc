#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "rlomm/baselines.hpp"
#include "rlomm/roadnet.hpp"
#include "rlomm/trajgraph.hpp"

namespace rlomm {

struct ParseError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonMonotoneTime : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TooSmall : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct InvalidConfig : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct LabeledTrajectory {
    std::int64_t id = 0;
    Trajectory points;
    std::vector<int> truth;  // segment id per point; may be empty when unlabeled
};
using Dataset = std::vector<LabeledTrajectory>;

/// Reads `traj_id,lat,lon,timestamp` CSV sorted by (traj_id, timestamp).
/// Truth fields are left empty.
Dataset load_trajectories(const std::string& path);
void save_trajectories(const std::string& path, const Dataset& trajs);

/// Reads/writes `traj_id,point_idx,seg_id` CSV into matching trajectories.
void load_labels(const std::string& path, Dataset& trajs);
void save_labels(const std::string& path, const Dataset& trajs);

/// Keeps every (1/keep_rate)-th point starting at index 0; labels sliced in
/// parallel. keep_rate must be one of 0.5, 0.25, 0.125.
LabeledTrajectory downsample(const LabeledTrajectory& traj, double keep_rate);

struct SplitResult {
    Dataset train, val, test;
};
/// Shuffled disjoint 70/20/10 split; floor sizes for val/test, remainder to
/// train. Requires at least 10 trajectories.
SplitResult split(Dataset dataset, std::uint64_t seed);

enum class NetworkStyle { Grid, Radial };

struct SynthConfig {
    NetworkStyle style = NetworkStyle::Grid;
    int blocks = 4;              // blocks per side (grid) or ring count (radial)
    double block_m = 100.0;      // block edge length / ring spacing
    int trajectory_count = 500;
    double speed_mps = 4.7;      // chosen so samples never land on segment joints
    double period_s = 15.0;
    double noise_sigma_m = 15.0;
    std::uint64_t seed = 1;
    double lane_offset_m = 2.0;  // directed twins sit offset to the right of travel
    int min_route_segments = 6;
    int max_route_segments = 14;
    double origin_lat = 40.0;
    double origin_lon = 116.35;

    void validate() const;
};

struct SynthWorld {
    std::vector<RoadSegment> segments;
    Dataset trajectories;
};

/// Deterministic synthetic world: a small road network of directed segment
/// pairs plus noisy GPS trajectories walked along it, with per-point truth.
SynthWorld synth_generate(const SynthConfig& cfg);

/// Writes roads.csv, trajectories.csv, labels.csv, and manifest.json into
/// out_dir. Byte-identical for identical cfg.
void write_dataset(const std::string& out_dir, const SynthWorld& world,
                   const SynthConfig& cfg);

struct DatasetManifest {
    std::string road_csv;
    std::string trajectory_csv;
    std::string labels_csv;  // may be empty
    std::uint64_t seed = 0;
    std::string labeler;  // "generator" or "hmm"
};
DatasetManifest read_manifest(const std::string& path);
void write_manifest(const std::string& path, const DatasetManifest& m);

/// Assigns truth via the exact-decode HMM matcher; overwrites any labels.
Dataset hmm_label(Dataset trajs, const LinkConnectionGraph& roads,
                  const HmmConfig& cfg);

}  // namespace rlomm
