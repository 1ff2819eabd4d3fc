#pragma once

#include <functional>
#include <span>

#include "rlomm/omdp.hpp"
#include "rlomm/roadnet.hpp"

namespace rlomm {

struct NoCandidates : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct TooLarge : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct HmmConfig {
    double sigma_m = 20.0;   // Gaussian emission over point-segment distance
    double beta_m = 50.0;    // exponential transition over route/haversine gap
    int n_c = 10;
    int hop_cutoff = 20;
};

struct MdpConfig {
    double discount = 0.9;
    int max_sweeps = 100;
    double tolerance = 1e-9;
    int n_c = 10;
    int hop_cutoff = 20;
    double connectivity_bonus = 25.0;  // reward for 1-hop continuity, scaled by 1/hops
};

/// Log-space scoring shared by the HMM matcher and the brute-force oracle.
/// Route distance between consecutive candidates is approximated by
/// hop count x mean segment length.
class HmmScorer {
public:
    HmmScorer(const LinkConnectionGraph& roads, HmmConfig cfg)
        : roads_(&roads), cfg_(cfg) {}

    double emission(const Candidate& c) const {
        const double r = c.distance_m / cfg_.sigma_m;
        return -0.5 * r * r;
    }
    /// prev -> cur transition given the two observed points.
    double transition(int prev_seg, int cur_seg, const GeoPoint& prev_p,
                      const GeoPoint& cur_p) const;

    const HmmConfig& config() const { return cfg_; }

private:
    const LinkConnectionGraph* roads_;
    HmmConfig cfg_;
};

/// Incremental Viterbi over per-point candidate lattices. push_point emits
/// the provisional match for the previous point (one-step lag, constant
/// time); flush emits the last point. decode() is the exact full-lattice
/// trace-back, equal to brute force under the same scoring.
class HmmOnlineMatcher {
public:
    HmmOnlineMatcher(const LinkConnectionGraph& roads, HmmConfig cfg)
        : roads_(&roads), scorer_(roads, cfg) {}

    /// Returns provisional emissions unlocked by this point.
    std::vector<int> push_point(const GeoPoint& p);
    std::vector<int> flush();

    /// Exact Viterbi path over everything pushed so far.
    std::vector<int> decode() const;

    static std::vector<int> match(const Trajectory& traj,
                                  const LinkConnectionGraph& roads, HmmConfig cfg);

private:
    const LinkConnectionGraph* roads_;
    HmmScorer scorer_;
    std::vector<CandidateSet> columns_;
    std::vector<std::vector<double>> best_;       // per column, per candidate
    std::vector<std::vector<int>> backlink_;      // per column, per candidate
    std::vector<GeoPoint> points_;
};

/// Offline MDP baseline: states are (point index, candidate), value
/// iteration to tolerance or max_sweeps, greedy decode by value.
std::vector<int> mdp_value_iteration_match(const Trajectory& traj,
                                           const LinkConnectionGraph& roads,
                                           const MdpConfig& cfg,
                                           bool* converged = nullptr);

/// Per point, the nearest segment (ties to lower id).
std::vector<int> greedy_nearest_match(const Trajectory& traj,
                                      const LinkConnectionGraph& roads);

/// Exhaustive enumeration over candidate index sequences under the supplied
/// scoring, returning the best index per column; ties broken toward the
/// reverse-lexicographically smaller index sequence (matching Viterbi
/// back-link order). Throws TooLarge beyond 1e6 sequences.
std::vector<int> brute_force_best_path(
    const std::vector<CandidateSet>& candidates,
    const std::function<double(std::span<const int>)>& sequence_score);

/// The HMM objective over a full candidate-index sequence, for the oracle.
double hmm_sequence_score(const std::vector<CandidateSet>& candidates,
                          const std::vector<GeoPoint>& points,
                          std::span<const int> choice, const HmmScorer& scorer);

}  // namespace rlomm
