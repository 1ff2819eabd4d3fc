#pragma once

#include <deque>
#include <random>
#include <vector>

#include "rlomm/roadnet.hpp"
#include "rlomm/trajgraph.hpp"

namespace rlomm {

struct EmptyTrajectory : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NoValidCandidate : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct MissingGroundTruth : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Reward constants (Eq.-style composite: accuracy, consecutive success,
/// detour penalty, road connectivity).
struct RewardConfig {
    double alpha = 0.01;          // consecutive-success bonus
    double beta = 0.05;           // detour penalty
    double gamma_rc = 0.02;       // connectivity weight
    int streak_threshold = 3;     // theta
    int history_capacity = 10;
    int connectivity_cutoff = 20; // hops
};

/// Per-trajectory precomputation: one entry per GPS point.
struct EpisodePlan {
    std::vector<GeoPoint> points;
    std::vector<int> grid_node;        // transition-graph node, -1 if unseen cell
    std::vector<CandidateSet> candidates;
    std::vector<int> truth;            // empty when unlabeled
    std::size_t length() const { return points.size(); }
};

EpisodePlan plan_episode(const Trajectory& traj, const LinkConnectionGraph& roads,
                         int n_c, const GridSpec& spec,
                         const TrajectoryTransitionGraph& tgraph,
                         const std::vector<int>* truth = nullptr);

/// One matching slot of a state: a point, its grid node, and candidates.
struct StateSlot {
    GeoPoint point;
    int grid_node = -1;
    CandidateSet candidates;
    int truth = -1;  // ground-truth segment id, -1 when unlabeled
};

/// OMDP state: up to k current points, the tail of the matched prefix, and
/// the two recurrent hidden vectors carried from the previous step.
struct State {
    int step_index = 0;              // ordinal of this state within the episode
    int point_offset = 0;            // index of the first covered point
    std::vector<StateSlot> slots;    // valid slots only (< k at trajectory tail)
    std::vector<int> matched_tail;   // slot-aligned, -1 padding at episode start
    std::vector<double> hidden_traj; // width d_h
    std::vector<double> hidden_road; // width d_h
    int k() const { return int(slots.size()); }
};

struct Action {
    std::vector<int> candidate_index;  // per slot
    std::vector<int> segment_id;       // per slot
};

struct SlotReward {
    double r_ac = 0.0, r_cs = 0.0, r_dp = 0.0, r_rc = 0.0;
    double total() const { return r_ac + r_cs + r_dp + r_rc; }
};

/// Mutable per-episode bookkeeping for the reward terms.
struct EpisodeContext {
    int streak = 0;
    std::deque<int> history;   // recent matched segments, FIFO, deduplicated
    int prev_segment = -1;     // predecessor for the connectivity term
};

struct TransitionRecord {
    State state;
    Action action;
    double reward = 0.0;
    State next_state;
    bool done = false;
};

/// First state of an episode: hiddens zero, matched tail -1-padded.
State init_episode(const EpisodePlan& plan, int k, int hidden_width);

/// Per valid slot, argmax over that slot's candidate scores; ties go to the
/// lowest candidate index. epsilon > 0 replaces each slot's choice with a
/// uniform draw with that probability (training-time exploration).
Action select_action(const State& state, const std::vector<std::vector<double>>& scores,
                     double epsilon = 0.0, std::mt19937_64* rng = nullptr);

/// Composite reward over the state's slots, updating the episode context
/// (streak, history queue, predecessor) slot by slot in order.
std::pair<double, std::vector<SlotReward>> compute_reward(
    const Action& action, const State& state, EpisodeContext& ctx,
    const LinkConnectionGraph& roads, const RewardConfig& cfg);

/// Environment transition: advances to the next k points; the matched tail
/// becomes the chosen segments; hiddens come from the encoder. done is set
/// when the trajectory is exhausted (the returned state is then empty).
State env_step(const State& state, const Action& action, const EpisodePlan& plan,
               const std::vector<double>& hidden_traj_next,
               const std::vector<double>& hidden_road_next, int k, bool& done);

/// Number of states an episode of the given length produces.
inline int episode_state_count(std::size_t length, int k) {
    return int((length + std::size_t(k) - 1) / std::size_t(k));
}

}  // namespace rlomm
