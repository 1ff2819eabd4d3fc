#pragma once

#include <random>

#include "rlomm/autodiff.hpp"
#include "rlomm/omdp.hpp"

namespace rlomm {

/// Widths and depths of the learnable stack. d covers d_r = d_t = d_h = d_e
/// (equal by construction: the alignment loss takes trajectory-road inner
/// products and the RNN output feeds the scorer at hidden width).
struct ModelDims {
    int d = 64;
    int d_a = 32;
    int gin_layers = 3;
    int gcn_layers = 3;
};

struct GinParams {
    ad::Param lift_w, lift_b;  // 8 -> d input lift
    struct Layer {
        ad::Param eps;         // scalar
        ad::Param w1, b1, w2, b2;
    };
    std::vector<Layer> layers;
};

struct GcnParams {
    struct Layer {
        ad::Param wa, wb;
        ad::BatchNormState bn;
    };
    std::vector<Layer> layers;
};

struct RnnParams {
    ad::Param wh, bh, wz, bz, we, be;
};

struct AttnParams {
    ad::Param wf, bf, wc, bc;
};

struct ModelParams {
    ModelDims dims;
    GinParams gin;
    GcnParams gcn;
    RnnParams rnn_traj;
    RnnParams rnn_road;
    AttnParams attn;

    static ModelParams init(const ModelDims& dims, std::mt19937_64& rng);
    std::vector<ad::Param*> all();
    std::vector<const ad::Param*> all() const;
    /// Hard copy of all values (target-network sync). Layouts must match.
    void copy_values_from(const ModelParams& other);
};

/// Fixed graph structure consumed by the encoders, prebuilt once per
/// (network, corpus) pair.
struct EncoderGraphs {
    ad::SparseMatrix gin_adj;    // segment x segment, undirected in/out union
    ad::SparseMatrix gcn_adj;    // node x node, in-neighbors, 1/sqrt(dd) coeffs
    ad::SparseMatrix grid_mean;  // node x segment, row-mean mapping (road-to-grid)
    std::vector<double> feats0;  // n_seg x 8, row-major
    int n_segments = 0;
    int n_nodes = 0;

    static EncoderGraphs build(const LinkConnectionGraph& roads,
                               const TrajectoryTransitionGraph& tgraph,
                               const RoadToGridMapping& mapping, const GridSpec& spec);
};

/// GIN over the link connection graph: input lift then per layer
/// z <- MLP((1+eps) z + sum_neighbors z). Returns [n_seg, d].
ad::Tensor gin_forward(ad::Tape& tape, const ad::SparseMatrix& adj, ad::Tensor feats0,
                       const GinParams& params);

/// GCN over the transition graph: per layer
/// z <- relu(BN(z Wa + sum_in 1/sqrt(dd) z Wb)). Returns [n_nodes, d].
ad::Tensor gcn_forward(ad::Tape& tape, const ad::SparseMatrix& adj, ad::Tensor reps0,
                       GcnParams& params, bool train);

/// Full representation pass: GIN -> road reps, road-to-grid mean -> GCN.
struct GraphReps {
    ad::Tensor road;  // z^r [n_seg, d]
    ad::Tensor grid;  // z^t [n_nodes, d]
};
GraphReps graph_reps(ad::Tape& tape, const EncoderGraphs& graphs, ModelParams& model,
                     bool train);

/// One RNN cell step: h = tanh(h_prev Wh + bh + z Wz + bz), e = h We + be.
std::pair<ad::Tensor, ad::Tensor> rnn_step(ad::Tape& tape, ad::Tensor h_prev,
                                           ad::Tensor z, const RnnParams& params);

/// Everything the scorer and the losses need for one state.
struct StateEncoding {
    std::vector<ad::Tensor> e_traj;      // per slot, [1, d]
    std::vector<ad::Tensor> e_road;      // per slot, [1, d]
    std::vector<ad::Tensor> anchors;     // per slot, [1, d] pre-RNN grid reps
    std::vector<ad::Tensor> cand_reps;   // per slot, [n_ci, d]
    ad::Tensor h_next_traj;              // [1, d]
    ad::Tensor h_next_road;              // [1, d]
};

StateEncoding encode_state(ad::Tape& tape, const State& state, const GraphReps& reps,
                           const ModelParams& model);

/// Attention scores for one slot: Q = tanh(concat(e_t, e_r) Wf + bf),
/// K = tanh(cand Wc + bc), O = Q K^T -> [1, n_ci].
ad::Tensor score_slot(ad::Tape& tape, ad::Tensor e_traj, ad::Tensor e_road,
                      ad::Tensor cand_reps, const AttnParams& params);

std::vector<ad::Tensor> score_state(ad::Tape& tape, const StateEncoding& enc,
                                    const AttnParams& params);

/// Plain-value copies for action selection.
std::vector<std::vector<double>> score_values(const std::vector<ad::Tensor>& scores);

}  // namespace rlomm
