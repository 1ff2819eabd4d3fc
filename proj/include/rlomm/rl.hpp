#pragma once

#include <deque>
#include <random>
#include <string>

#include "rlomm/data.hpp"
#include "rlomm/encoders.hpp"
#include "rlomm/omdp.hpp"

namespace rlomm {

struct InsufficientExperience : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct NonFiniteLoss : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// FIFO experience store; eviction strictly oldest-first.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity = 50'000) : capacity_(capacity) {}

    void push(TransitionRecord rec);
    /// Uniform sample without replacement; requires size() >= n.
    std::vector<TransitionRecord> sample(std::size_t n, std::mt19937_64& rng) const;

    std::size_t size() const { return ring_.size(); }
    std::size_t capacity() const { return capacity_; }
    const TransitionRecord& at(std::size_t i) const { return ring_[i]; }

private:
    std::size_t capacity_;
    std::deque<TransitionRecord> ring_;
};

struct TrainingConfig {
    double lr = 0.001;
    int batch_size = 512;
    int epochs = 200;
    int target_sync_interval = 10;  // iterations between hard target copies
    double discount = 0.9;
    double lambda = 0.1;            // alignment loss weight
    double tau = 0.1;               // InfoNCE temperature
    int k = 4;                      // points per state (4/2/1 per sampling regime)
    double epsilon = 0.0;           // exploration rate during experience collection
    double epsilon_final = -1.0;    // linear anneal endpoint; negative keeps epsilon
    double lr_final = -1.0;         // linear decay endpoint; negative keeps lr
    int patience = 10;              // early-stop epochs without val AccT improvement
    int n_c = 10;
    int traj_batch = 32;            // trajectories per experience batch
    int updates_per_batch = 1;      // optimization iterations per experience batch
    std::uint64_t seed = 1;
    std::size_t replay_capacity = 50'000;
    RewardConfig reward;
    ModelDims dims;

    void validate() const;
};

struct DualNetworks {
    ModelParams main_net;
    ModelParams target_net;

    static DualNetworks init(const ModelDims& dims, std::mt19937_64& rng);
    /// Hard copy main -> target.
    void sync() { target_net.copy_values_from(main_net); }
};

/// Everything derived from (road network, training corpus) that the encoders
/// consume: the city grid, the trajectory transition graph, the road-to-grid
/// mapping, and the prebuilt sparse structures.
struct WorldModel {
    GridSpec spec;
    TrajectoryTransitionGraph tgraph;
    RoadToGridMapping mapping;
    EncoderGraphs graphs;

    static WorldModel build(const LinkConnectionGraph& roads, double cell_m,
                            const Dataset& corpus, double margin_m = 100.0);
};

struct InferenceResult {
    Action action;
    double reward = 0.0;
    std::vector<SlotReward> slot_rewards;
    std::vector<std::vector<double>> scores;  // per slot
    std::vector<double> h_traj, h_road;       // next hidden states
};

/// One pass of experience inference for a state: encode, score, select,
/// reward. Runs in eval mode on top of precomputed graph reps; the tape is
/// rolled back before returning.
InferenceResult experience_inference(ad::Tape& tape, const State& state,
                                     EpisodeContext& ctx, const GraphReps& reps,
                                     const ModelParams& model,
                                     const LinkConnectionGraph& roads,
                                     const RewardConfig& rcfg, double epsilon = 0.0,
                                     std::mt19937_64* rng = nullptr);

/// Double-DQN bootstrap target: action by argmax under the main net, value
/// from the target net, summed over valid slots; terminal records return the
/// reward alone. Both tapes are rolled back before returning.
double td_target(const TransitionRecord& rec, ad::Tape& main_tape,
                 const GraphReps& main_reps, ad::Tape& target_tape,
                 const GraphReps& target_reps, const ModelParams& main_net,
                 const ModelParams& target_net, double discount);

/// Mean elementwise Huber between predictions and constants.
ad::Tensor huber_loss(ad::Tape& tape, const ad::Tensor& q,
                      const std::vector<double>& q_target);

struct AlignmentSlot {
    ad::Tensor anchor;      // [1, d]
    ad::Tensor candidates;  // [n, d], positive + negatives
    int positive = -1;      // row of the ground-truth candidate
};

/// InfoNCE over candidate similarities, one positive per anchor; mean over
/// anchors. Returns an undefined tensor when no slot has a positive.
ad::Tensor info_nce(ad::Tape& tape, const std::vector<AlignmentSlot>& slots,
                    double tau);

/// L = L_td + lambda * L_a.
ad::Tensor total_loss(ad::Tape& tape, const ad::Tensor& td, const ad::Tensor& align,
                      double lambda);

struct EpochMetrics {
    int epoch = 0;
    double td_loss = 0.0;
    double align_loss = 0.0;
    double val_acct = 0.0;
    double val_lcsr = 0.0;
};

struct TrainResult {
    std::vector<EpochMetrics> metrics;
    int iterations = 0;
    bool early_stopped = false;
};

/// The full training loop: per epoch, per trajectory batch, experience
/// collection into the replay buffer followed by one optimization iteration
/// (sampled batch, Double-DQN targets, Huber TD + weighted InfoNCE, Adam),
/// with hard target syncs and early stopping on validation AccT.
/// When out_dir is non-empty, writes config.json, metrics.csv, and
/// checkpoint files there.
TrainResult train(DualNetworks& nets, const LinkConnectionGraph& roads,
                  const WorldModel& world, const Dataset& train_set,
                  const Dataset& val_set, const TrainingConfig& cfg,
                  const std::string& out_dir = "");

/// Streaming matcher: graph representations are encoded once at
/// construction; each arriving point costs a bounded amount of work
/// regardless of stream position (the tape is rolled back to the
/// representation mark after every state).
class OnlineMatcher {
public:
    OnlineMatcher(const LinkConnectionGraph& roads, const WorldModel& world,
                  const ModelParams& model, int k, int n_c);

    /// Feeds one point; returns (point index, segment id) pairs emitted when
    /// a full state is matched.
    std::vector<std::pair<int, int>> push_point(const GeoPoint& p);
    /// Matches any buffered tail shorter than k.
    std::vector<std::pair<int, int>> flush();

    static std::vector<int> match(const Trajectory& traj,
                                  const LinkConnectionGraph& roads,
                                  const WorldModel& world, const ModelParams& model,
                                  int k, int n_c);

private:
    std::vector<std::pair<int, int>> match_buffered();

    const LinkConnectionGraph* roads_;
    const WorldModel* world_;
    const ModelParams* model_;
    int k_, n_c_;
    ad::Tape tape_;
    GraphReps reps_;
    std::size_t rep_mark_ = 0;
    std::vector<GeoPoint> pending_;
    std::vector<int> tail_;
    std::vector<double> h_traj_, h_road_;
    int next_point_idx_ = 0;
    int step_index_ = 0;
};

}  // namespace rlomm
