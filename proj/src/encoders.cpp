#include "rlomm/encoders.hpp"

#include <algorithm>
#include <cmath>

namespace rlomm {

namespace {

void init_normal(ad::Param& p, std::mt19937_64& rng, double scale) {
    std::normal_distribution<double> dist(0.0, scale);
    for (auto& v : p.value) v = dist(rng);
}

ad::Param weight(const std::string& name, int in, int out, std::mt19937_64& rng,
                 double gain = 1.0) {
    ad::Param p(name, {in, out});
    init_normal(p, rng, gain / std::sqrt(double(in)));
    return p;
}

ad::Param bias(const std::string& name, int n) { return ad::Param(name, {n}); }

}  // namespace

ModelParams ModelParams::init(const ModelDims& dims, std::mt19937_64& rng) {
    ModelParams m;
    m.dims = dims;
    const int d = dims.d;

    m.gin.lift_w = weight("gin.lift.w", 8, d, rng);
    m.gin.lift_b = bias("gin.lift.b", d);
    for (int l = 0; l < dims.gin_layers; ++l) {
        const std::string p = "gin.l" + std::to_string(l);
        // Sum aggregation inflates magnitudes by roughly 1 + degree per
        // layer; the reduced gain keeps deep stacks at unit scale so the
        // downstream tanh units start in their linear range.
        GinParams::Layer layer{ad::Param(p + ".eps", {1}),
                               weight(p + ".w1", d, d, rng, 0.5), bias(p + ".b1", d),
                               weight(p + ".w2", d, d, rng, 0.5), bias(p + ".b2", d)};
        m.gin.layers.push_back(std::move(layer));
    }
    for (int l = 0; l < dims.gcn_layers; ++l) {
        const std::string p = "gcn.l" + std::to_string(l);
        GcnParams::Layer layer{weight(p + ".wa", d, d, rng), weight(p + ".wb", d, d, rng),
                               ad::BatchNormState(p + ".bn", d)};
        m.gcn.layers.push_back(std::move(layer));
    }
    auto make_rnn = [&](const std::string& p) {
        return RnnParams{weight(p + ".wh", d, d, rng), bias(p + ".bh", d),
                         weight(p + ".wz", d, d, rng), bias(p + ".bz", d),
                         weight(p + ".we", d, d, rng), bias(p + ".be", d)};
    };
    m.rnn_traj = make_rnn("rnn_traj");
    m.rnn_road = make_rnn("rnn_road");
    m.attn = AttnParams{weight("attn.wf", 2 * d, dims.d_a, rng), bias("attn.bf", dims.d_a),
                        weight("attn.wc", d, dims.d_a, rng), bias("attn.bc", dims.d_a)};
    return m;
}

std::vector<ad::Param*> ModelParams::all() {
    std::vector<ad::Param*> out = {&gin.lift_w, &gin.lift_b};
    for (auto& l : gin.layers)
        for (ad::Param* p : {&l.eps, &l.w1, &l.b1, &l.w2, &l.b2}) out.push_back(p);
    for (auto& l : gcn.layers)
        for (ad::Param* p : {&l.wa, &l.wb, &l.bn.gamma, &l.bn.beta}) out.push_back(p);
    for (RnnParams* r : {&rnn_traj, &rnn_road})
        for (ad::Param* p : {&r->wh, &r->bh, &r->wz, &r->bz, &r->we, &r->be})
            out.push_back(p);
    for (ad::Param* p : {&attn.wf, &attn.bf, &attn.wc, &attn.bc}) out.push_back(p);
    return out;
}

std::vector<const ad::Param*> ModelParams::all() const {
    auto mutable_all = const_cast<ModelParams*>(this)->all();
    return {mutable_all.begin(), mutable_all.end()};
}

void ModelParams::copy_values_from(const ModelParams& other) {
    auto dst = all();
    auto src = other.all();
    if (dst.size() != src.size()) throw ad::ShapeMismatch("model layout mismatch");
    for (std::size_t i = 0; i < dst.size(); ++i) {
        if (dst[i]->shape != src[i]->shape) throw ad::ShapeMismatch("param shape mismatch");
        dst[i]->value = src[i]->value;
    }
    for (std::size_t l = 0; l < gcn.layers.size(); ++l) {
        gcn.layers[l].bn.run_mean = other.gcn.layers[l].bn.run_mean;
        gcn.layers[l].bn.run_var = other.gcn.layers[l].bn.run_var;
    }
}

EncoderGraphs EncoderGraphs::build(const LinkConnectionGraph& roads,
                                   const TrajectoryTransitionGraph& tgraph,
                                   const RoadToGridMapping& mapping,
                                   const GridSpec& spec) {
    EncoderGraphs g;
    g.n_segments = roads.size();
    g.n_nodes = tgraph.node_count();

    // GIN neighborhood: undirected union of in and out neighbors.
    g.gin_adj.rows = g.gin_adj.cols = g.n_segments;
    g.gin_adj.row_ptr.push_back(0);
    for (int i = 0; i < g.n_segments; ++i) {
        std::vector<int> nbrs(roads.out_edges(i));
        nbrs.insert(nbrs.end(), roads.in_edges(i).begin(), roads.in_edges(i).end());
        std::sort(nbrs.begin(), nbrs.end());
        nbrs.erase(std::unique(nbrs.begin(), nbrs.end()), nbrs.end());
        for (int j : nbrs) {
            g.gin_adj.col_idx.push_back(j);
            g.gin_adj.vals.push_back(1.0);
        }
        g.gin_adj.row_ptr.push_back(int(g.gin_adj.col_idx.size()));
    }

    // GCN: in-neighbors with 1/sqrt(dhat_i dhat_v), dhat = 1 + in-degree.
    const auto in_nbrs = tgraph.in_neighbors();
    g.gcn_adj.rows = g.gcn_adj.cols = g.n_nodes;
    g.gcn_adj.row_ptr.push_back(0);
    for (int i = 0; i < g.n_nodes; ++i) {
        const double di = 1.0 + double(in_nbrs[i].size());
        for (int v : in_nbrs[i]) {
            g.gcn_adj.col_idx.push_back(v);
            g.gcn_adj.vals.push_back(1.0 / std::sqrt(di * (1.0 + double(in_nbrs[v].size()))));
        }
        g.gcn_adj.row_ptr.push_back(int(g.gcn_adj.col_idx.size()));
    }

    // Road-to-grid mean mapping over the transition graph's nodes.
    g.grid_mean.rows = g.n_nodes;
    g.grid_mean.cols = g.n_segments;
    g.grid_mean.row_ptr.push_back(0);
    for (int i = 0; i < g.n_nodes; ++i) {
        const auto& segs = mapping.segments_at(tgraph.cell(i));
        for (int s : segs) {
            g.grid_mean.col_idx.push_back(s);
            g.grid_mean.vals.push_back(1.0 / double(segs.size()));
        }
        g.grid_mean.row_ptr.push_back(int(g.grid_mean.col_idx.size()));
    }

    const auto feats = segment_features(roads, spec);
    g.feats0.reserve(std::size_t(g.n_segments) * 8);
    for (const auto& f : feats) g.feats0.insert(g.feats0.end(), f.begin(), f.end());
    return g;
}

ad::Tensor gin_forward(ad::Tape& tape, const ad::SparseMatrix& adj, ad::Tensor feats0,
                       const GinParams& params) {
    ad::Tensor z = ad::add(ad::matmul(feats0, tape.leaf(const_cast<ad::Param&>(params.lift_w))),
                           tape.leaf(const_cast<ad::Param&>(params.lift_b)));
    for (const auto& layer : params.layers) {
        auto& l = const_cast<GinParams::Layer&>(layer);
        ad::Tensor eps = tape.leaf(l.eps);
        ad::Tensor self = ad::mul(z, ad::add_const(eps, 1.0));
        ad::Tensor agg = ad::add(self, ad::spmm(adj, z));
        ad::Tensor hidden = ad::relu(ad::add(ad::matmul(agg, tape.leaf(l.w1)), tape.leaf(l.b1)));
        z = ad::add(ad::matmul(hidden, tape.leaf(l.w2)), tape.leaf(l.b2));
    }
    return z;
}

ad::Tensor gcn_forward(ad::Tape& tape, const ad::SparseMatrix& adj, ad::Tensor reps0,
                       GcnParams& params, bool train) {
    ad::Tensor z = reps0;
    for (auto& layer : params.layers) {
        ad::Tensor pre = ad::add(ad::matmul(z, tape.leaf(layer.wa)),
                                 ad::matmul(ad::spmm(adj, z), tape.leaf(layer.wb)));
        z = ad::relu(ad::batch_norm(pre, layer.bn, train));
    }
    return z;
}

GraphReps graph_reps(ad::Tape& tape, const EncoderGraphs& graphs, ModelParams& model,
                     bool train) {
    ad::Tensor feats0 = tape.input({graphs.n_segments, 8}, graphs.feats0);
    ad::Tensor road = gin_forward(tape, graphs.gin_adj, feats0, model.gin);
    ad::Tensor reps0 = ad::spmm(graphs.grid_mean, road);
    ad::Tensor grid = gcn_forward(tape, graphs.gcn_adj, reps0, model.gcn, train);
    return {road, grid};
}

std::pair<ad::Tensor, ad::Tensor> rnn_step(ad::Tape& tape, ad::Tensor h_prev,
                                           ad::Tensor z, const RnnParams& params) {
    auto& p = const_cast<RnnParams&>(params);
    ad::Tensor pre = ad::add(ad::add(ad::matmul(h_prev, tape.leaf(p.wh)), tape.leaf(p.bh)),
                             ad::add(ad::matmul(z, tape.leaf(p.wz)), tape.leaf(p.bz)));
    ad::Tensor h = ad::tanh(pre);
    ad::Tensor e = ad::add(ad::matmul(h, tape.leaf(p.we)), tape.leaf(p.be));
    return {h, e};
}

StateEncoding encode_state(ad::Tape& tape, const State& state, const GraphReps& reps,
                           const ModelParams& model) {
    StateEncoding enc;
    const int d = model.dims.d;
    if (int(state.hidden_traj.size()) != d || int(state.hidden_road.size()) != d)
        throw ad::ShapeMismatch("state hidden width mismatch");

    ad::Tensor h_t = tape.input({1, d}, state.hidden_traj);
    ad::Tensor h_r = tape.input({1, d}, state.hidden_road);
    for (int j = 0; j < state.k(); ++j) {
        const StateSlot& slot = state.slots[j];
        if (slot.candidates.empty()) throw NoValidCandidate("slot without candidates");

        ad::Tensor anchor = ad::gather_rows(reps.grid, {slot.grid_node});
        enc.anchors.push_back(anchor);
        auto [ht, et] = rnn_step(tape, h_t, anchor, model.rnn_traj);
        h_t = ht;
        enc.e_traj.push_back(et);

        ad::Tensor road_in = ad::gather_rows(reps.road, {state.matched_tail[j]});
        auto [hr, er] = rnn_step(tape, h_r, road_in, model.rnn_road);
        h_r = hr;
        enc.e_road.push_back(er);

        std::vector<int> cand_ids;
        for (const auto& c : slot.candidates) cand_ids.push_back(c.segment_id);
        enc.cand_reps.push_back(ad::gather_rows(reps.road, std::move(cand_ids)));
    }
    enc.h_next_traj = h_t;
    enc.h_next_road = h_r;
    return enc;
}

ad::Tensor score_slot(ad::Tape& tape, ad::Tensor e_traj, ad::Tensor e_road,
                      ad::Tensor cand_reps, const AttnParams& params) {
    auto& p = const_cast<AttnParams&>(params);
    ad::Tensor fused = ad::concat_cols(e_traj, e_road);
    ad::Tensor q = ad::tanh(ad::add(ad::matmul(fused, tape.leaf(p.wf)), tape.leaf(p.bf)));
    ad::Tensor k = ad::tanh(ad::add(ad::matmul(cand_reps, tape.leaf(p.wc)), tape.leaf(p.bc)));
    return ad::matmul(q, ad::transpose(k));
}

std::vector<ad::Tensor> score_state(ad::Tape& tape, const StateEncoding& enc,
                                    const AttnParams& params) {
    std::vector<ad::Tensor> out;
    for (std::size_t j = 0; j < enc.e_traj.size(); ++j)
        out.push_back(score_slot(tape, enc.e_traj[j], enc.e_road[j], enc.cand_reps[j], params));
    return out;
}

std::vector<std::vector<double>> score_values(const std::vector<ad::Tensor>& scores) {
    std::vector<std::vector<double>> out;
    for (const auto& s : scores) out.emplace_back(s.value().begin(), s.value().end());
    return out;
}

}  // namespace rlomm
