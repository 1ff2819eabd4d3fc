#include "rlomm/rl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include <nlohmann/json.hpp>

#include "rlomm/eval.hpp"

namespace rlomm {

void ReplayBuffer::push(TransitionRecord rec) {
    ring_.push_back(std::move(rec));
    if (ring_.size() > capacity_) ring_.pop_front();
}

std::vector<TransitionRecord> ReplayBuffer::sample(std::size_t n,
                                                   std::mt19937_64& rng) const {
    if (ring_.size() < n || n == 0)
        throw InsufficientExperience("buffer holds " + std::to_string(ring_.size()) +
                                     " records, need " + std::to_string(n));
    std::vector<std::size_t> idx(ring_.size());
    std::iota(idx.begin(), idx.end(), 0);
    // Partial Fisher-Yates: the first n entries are a uniform draw without
    // replacement.
    for (std::size_t i = 0; i < n; ++i) {
        std::uniform_int_distribution<std::size_t> d(i, idx.size() - 1);
        std::swap(idx[i], idx[d(rng)]);
    }
    std::vector<TransitionRecord> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(ring_[idx[i]]);
    return out;
}

void TrainingConfig::validate() const {
    if (!(discount > 0.0 && discount < 1.0))
        throw InvalidConfig("discount must be in (0, 1)");
    if (lambda < 0.0) throw InvalidConfig("lambda must be >= 0");
    if (tau <= 0.0) throw InvalidConfig("tau must be > 0");
    if (lr < 0.0) throw InvalidConfig("lr must be >= 0");
    if (batch_size < 1 || epochs < 0 || target_sync_interval < 1 || k < 1 ||
        n_c < 1 || traj_batch < 1 || patience < 1 || updates_per_batch < 1)
        throw InvalidConfig("non-positive training dimension");
    if (epsilon < 0.0 || epsilon > 1.0) throw InvalidConfig("epsilon must be in [0, 1]");
    if (epsilon_final > 1.0) throw InvalidConfig("epsilon_final must be in [0, 1]");
    if (lr_final >= 0.0 && lr < 0.0) throw InvalidConfig("lr_final without lr");
}

DualNetworks DualNetworks::init(const ModelDims& dims, std::mt19937_64& rng) {
    DualNetworks n{ModelParams::init(dims, rng), ModelParams::init(dims, rng)};
    n.sync();
    return n;
}

WorldModel WorldModel::build(const LinkConnectionGraph& roads, double cell_m,
                             const Dataset& corpus, double margin_m) {
    WorldModel w;
    GeoPoint lo = roads.bbox_min(), hi = roads.bbox_max();
    const double dlat = margin_m / kMetersPerDegLat;
    const double dlon = margin_m / (kMetersPerDegLat * std::cos(lo.lat * M_PI / 180.0));
    lo.lat -= dlat;
    lo.lon -= dlon;
    hi.lat += dlat;
    hi.lon += dlon;
    w.spec = GridSpec::from_bbox(lo, hi, cell_m);
    std::vector<Trajectory> trajs;
    trajs.reserve(corpus.size());
    for (const auto& t : corpus) trajs.push_back(t.points);
    w.tgraph = build_transition_graph(trajs, w.spec);
    w.mapping = RoadToGridMapping::build(w.spec, roads);
    w.graphs = EncoderGraphs::build(roads, w.tgraph, w.mapping, w.spec);
    return w;
}

InferenceResult experience_inference(ad::Tape& tape, const State& state,
                                     EpisodeContext& ctx, const GraphReps& reps,
                                     const ModelParams& model,
                                     const LinkConnectionGraph& roads,
                                     const RewardConfig& rcfg, double epsilon,
                                     std::mt19937_64* rng) {
    InferenceResult out;
    const std::size_t m = tape.mark();
    const auto enc = encode_state(tape, state, reps, model);
    const auto scored = score_state(tape, enc, model.attn);
    out.scores = score_values(scored);
    out.h_traj.assign(enc.h_next_traj.value().begin(), enc.h_next_traj.value().end());
    out.h_road.assign(enc.h_next_road.value().begin(), enc.h_next_road.value().end());
    tape.reset_to(m);

    out.action = select_action(state, out.scores, epsilon, rng);
    auto [total, slots] = compute_reward(out.action, state, ctx, roads, rcfg);
    out.reward = total;
    out.slot_rewards = std::move(slots);
    return out;
}

double td_target(const TransitionRecord& rec, ad::Tape& main_tape,
                 const GraphReps& main_reps, ad::Tape& target_tape,
                 const GraphReps& target_reps, const ModelParams& main_net,
                 const ModelParams& target_net, double discount) {
    if (rec.done || rec.next_state.slots.empty()) return rec.reward;
    const State& ns = rec.next_state;

    // Action selection under the main network.
    const std::size_t mm = main_tape.mark();
    const auto enc_m = encode_state(main_tape, ns, main_reps, main_net);
    const auto scores_m = score_state(main_tape, enc_m, main_net.attn);
    std::vector<int> a_star;
    a_star.reserve(scores_m.size());
    for (const auto& s : scores_m) {
        const auto v = s.value();
        int best = 0;
        for (std::size_t c = 1; c < v.size(); ++c)
            if (v[c] > v[best]) best = int(c);
        a_star.push_back(best);
    }
    main_tape.reset_to(mm);

    // Value of that action under the target network.
    const std::size_t tm = target_tape.mark();
    const auto enc_t = encode_state(target_tape, ns, target_reps, target_net);
    const auto scores_t = score_state(target_tape, enc_t, target_net.attn);
    double q = 0.0;
    for (std::size_t j = 0; j < scores_t.size(); ++j)
        q += scores_t[j].value()[std::size_t(a_star[j])];
    target_tape.reset_to(tm);

    return rec.reward + discount * q;
}

ad::Tensor huber_loss(ad::Tape& tape, const ad::Tensor& q,
                      const std::vector<double>& q_target) {
    auto t = tape.input({int(q_target.size())}, q_target);
    return ad::mean_all(ad::huber_unit(ad::sub(q, t)));
}

ad::Tensor info_nce(ad::Tape&, const std::vector<AlignmentSlot>& slots,
                    double tau) {
    ad::Tensor sum;
    int n = 0;
    for (const auto& slot : slots) {
        if (slot.positive < 0) continue;
        if (slot.anchor.cols() != slot.candidates.cols())
            throw DimensionMismatch("anchor/candidate width mismatch");
        auto sims = ad::mul_const(
            ad::matmul(slot.anchor, ad::transpose(slot.candidates)), 1.0 / tau);
        const auto v = sims.value();
        const double peak = *std::max_element(v.begin(), v.end());
        auto lse = ad::add_const(
            ad::log(ad::sum_all(ad::exp(ad::add_const(sims, -peak)))), peak);
        auto pos = ad::pick(sims, {slot.positive});
        auto term = ad::sub(lse, pos);
        sum = sum.defined() ? ad::add(sum, term) : term;
        ++n;
    }
    if (n == 0) return {};
    return ad::mul_const(sum, 1.0 / n);
}

ad::Tensor total_loss(ad::Tape&, const ad::Tensor& td, const ad::Tensor& align,
                      double lambda) {
    if (!align.defined() || lambda == 0.0) return td;
    return ad::add(td, ad::mul_const(align, lambda));
}

namespace {

struct IterationLosses {
    double td = 0.0;
    double align = 0.0;
};

IterationLosses train_iteration(DualNetworks& nets, const WorldModel& world,
                                const ReplayBuffer& buffer, const TrainingConfig& cfg,
                                double lr, std::mt19937_64& rng, ad::AdamState& adam,
                                std::span<ad::Param* const> params) {
    const auto batch = buffer.sample(std::size_t(cfg.batch_size), rng);

    ad::Tape main_tape, target_tape;
    auto main_reps = graph_reps(main_tape, world.graphs, nets.main_net, true);
    auto target_reps = graph_reps(target_tape, world.graphs, nets.target_net, false);

    std::vector<double> targets;
    targets.reserve(batch.size());
    for (const auto& rec : batch)
        targets.push_back(td_target(rec, main_tape, main_reps, target_tape,
                                    target_reps, nets.main_net, nets.target_net,
                                    cfg.discount));

    ad::Tensor td_sum;
    std::vector<AlignmentSlot> align_slots;
    for (std::size_t i = 0; i < batch.size(); ++i) {
        const auto& rec = batch[i];
        const auto enc = encode_state(main_tape, rec.state, main_reps, nets.main_net);
        const auto scored = score_state(main_tape, enc, nets.main_net.attn);

        ad::Tensor q;
        for (std::size_t j = 0; j < scored.size(); ++j) {
            auto picked = ad::pick(scored[j], {rec.action.candidate_index[j]});
            q = q.defined() ? ad::add(q, picked) : picked;
        }
        auto term = ad::huber_unit(ad::add_const(q, -targets[i]));
        td_sum = td_sum.defined() ? ad::add(td_sum, term) : term;

        for (std::size_t j = 0; j < rec.state.slots.size(); ++j) {
            const auto& slot = rec.state.slots[j];
            if (slot.truth < 0) continue;
            int pos = -1;
            for (std::size_t c = 0; c < slot.candidates.size(); ++c)
                if (slot.candidates[c].segment_id == slot.truth) {
                    pos = int(c);
                    break;
                }
            if (pos < 0) continue;  // truth outside the candidate set
            align_slots.push_back({enc.e_traj[j], enc.cand_reps[j], pos});
        }
    }

    auto td = ad::mul_const(td_sum, 1.0 / double(batch.size()));
    auto align = info_nce(main_tape, align_slots, cfg.tau);
    auto loss = total_loss(main_tape, td, align, cfg.lambda);

    IterationLosses out{td.scalar(), align.defined() ? align.scalar() : 0.0};
    if (!std::isfinite(loss.scalar()))
        throw NonFiniteLoss("loss diverged: td=" + std::to_string(out.td) +
                            " align=" + std::to_string(out.align));

    for (auto* p : params) p->zero_grad();
    main_tape.backward(loss);
    ad::adam_step(params, adam, lr);
    return out;
}

}  // namespace

TrainResult train(DualNetworks& nets, const LinkConnectionGraph& roads,
                  const WorldModel& world, const Dataset& train_set,
                  const Dataset& val_set, const TrainingConfig& cfg,
                  const std::string& out_dir) {
    cfg.validate();
    namespace fs = std::filesystem;
    if (!out_dir.empty()) fs::create_directories(out_dir);

    std::mt19937_64 rng(cfg.seed);
    std::vector<EpisodePlan> plans;
    plans.reserve(train_set.size());
    for (const auto& t : train_set)
        plans.push_back(plan_episode(t.points, roads, cfg.n_c, world.spec,
                                     world.tgraph, &t.truth));

    ReplayBuffer buffer(cfg.replay_capacity);
    ad::AdamState adam;
    auto param_ptrs = nets.main_net.all();

    TrainResult result;
    double best_val = -1.0;
    int since_best = 0;

    auto validate_now = [&] {
        std::vector<std::vector<int>> preds, truths;
        for (const auto& t : val_set) {
            preds.push_back(OnlineMatcher::match(t.points, roads, world,
                                                 nets.main_net, cfg.k, cfg.n_c));
            truths.push_back(t.truth);
        }
        return std::pair{acct(preds, truths), lcsr(preds, truths)};
    };

    const double eps_end = cfg.epsilon_final < 0.0 ? cfg.epsilon : cfg.epsilon_final;
    const double lr_end = cfg.lr_final < 0.0 ? cfg.lr : cfg.lr_final;
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double frac = cfg.epochs > 1 ? double(epoch) / (cfg.epochs - 1) : 0.0;
        const double epsilon = cfg.epsilon + frac * (eps_end - cfg.epsilon);
        const double lr = cfg.lr + frac * (lr_end - cfg.lr);
        std::vector<std::size_t> order(plans.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);

        double td_total = 0.0, align_total = 0.0;
        int iters_this_epoch = 0;
        for (std::size_t start = 0; start < order.size();
             start += std::size_t(cfg.traj_batch)) {
            {
                // Experience collection in eval mode over a fresh snapshot
                // of the graph representations.
                ad::Tape tape;
                auto reps = graph_reps(tape, world.graphs, nets.main_net, false);
                const std::size_t stop =
                    std::min(order.size(), start + std::size_t(cfg.traj_batch));
                for (std::size_t oi = start; oi < stop; ++oi) {
                    const auto& plan = plans[order[oi]];
                    State s = init_episode(plan, cfg.k, cfg.dims.d);
                    EpisodeContext ctx;
                    while (true) {
                        auto res =
                            experience_inference(tape, s, ctx, reps, nets.main_net,
                                                 roads, cfg.reward, epsilon, &rng);
                        bool done = false;
                        State next = env_step(s, res.action, plan, res.h_traj,
                                              res.h_road, cfg.k, done);
                        buffer.push({s, res.action, res.reward, next, done});
                        if (done) break;
                        s = std::move(next);
                    }
                }
            }
            if (buffer.size() >= std::size_t(cfg.batch_size)) {
                for (int u = 0; u < cfg.updates_per_batch; ++u) {
                    auto losses = train_iteration(nets, world, buffer, cfg, lr, rng,
                                                  adam, param_ptrs);
                    td_total += losses.td;
                    align_total += losses.align;
                    ++iters_this_epoch;
                    ++result.iterations;
                    if (result.iterations % cfg.target_sync_interval == 0) nets.sync();
                }
            }
        }

        auto [va, vl] = validate_now();
        EpochMetrics m;
        m.epoch = epoch;
        m.td_loss = iters_this_epoch ? td_total / iters_this_epoch : 0.0;
        m.align_loss = iters_this_epoch ? align_total / iters_this_epoch : 0.0;
        m.val_acct = va;
        m.val_lcsr = vl;
        result.metrics.push_back(m);

        if (va > best_val + 1e-12) {
            best_val = va;
            since_best = 0;
            if (!out_dir.empty()) {
                auto ps = nets.main_net.all();
                ad::save_checkpoint((fs::path(out_dir) / "best.ckpt").string(), ps);
            }
        } else if (++since_best >= cfg.patience) {
            result.early_stopped = true;
            break;
        }
    }

    if (!out_dir.empty()) {
        auto ps = nets.main_net.all();
        ad::save_checkpoint((fs::path(out_dir) / "last.ckpt").string(), ps);

        std::ofstream csv(fs::path(out_dir) / "metrics.csv");
        csv << "epoch,td_loss,align_loss,val_AccT,val_LCSR\n";
        char line[160];
        for (const auto& m : result.metrics) {
            std::snprintf(line, sizeof line, "%d,%.10g,%.10g,%.10g,%.10g\n", m.epoch,
                          m.td_loss, m.align_loss, m.val_acct, m.val_lcsr);
            csv << line;
        }

        nlohmann::json j{{"lr", cfg.lr},
                         {"batch_size", cfg.batch_size},
                         {"epochs", cfg.epochs},
                         {"target_sync_interval", cfg.target_sync_interval},
                         {"discount", cfg.discount},
                         {"lambda", cfg.lambda},
                         {"tau", cfg.tau},
                         {"k", cfg.k},
                         {"epsilon", cfg.epsilon},
                         {"epsilon_final", cfg.epsilon_final},
                         {"lr_final", cfg.lr_final},
                         {"patience", cfg.patience},
                         {"n_c", cfg.n_c},
                         {"traj_batch", cfg.traj_batch},
                         {"updates_per_batch", cfg.updates_per_batch},
                         {"seed", cfg.seed},
                         {"replay_capacity", cfg.replay_capacity},
                         {"d", cfg.dims.d},
                         {"d_a", cfg.dims.d_a}};
        std::ofstream(fs::path(out_dir) / "config.json") << j.dump(2) << '\n';
    }
    return result;
}

OnlineMatcher::OnlineMatcher(const LinkConnectionGraph& roads, const WorldModel& world,
                             const ModelParams& model, int k, int n_c)
    : roads_(&roads), world_(&world), model_(&model), k_(k), n_c_(n_c) {
    reps_ = graph_reps(tape_, world.graphs, const_cast<ModelParams&>(model), false);
    rep_mark_ = tape_.mark();
    h_traj_.assign(std::size_t(model.dims.d), 0.0);
    h_road_.assign(std::size_t(model.dims.d), 0.0);
}

std::vector<std::pair<int, int>> OnlineMatcher::push_point(const GeoPoint& p) {
    pending_.push_back(p);
    if (int(pending_.size()) < k_) return {};
    return match_buffered();
}

std::vector<std::pair<int, int>> OnlineMatcher::flush() {
    if (pending_.empty()) return {};
    return match_buffered();
}

std::vector<std::pair<int, int>> OnlineMatcher::match_buffered() {
    State s;
    s.step_index = step_index_++;
    s.point_offset = next_point_idx_;
    for (const auto& p : pending_) {
        StateSlot slot;
        slot.point = p;
        const auto cell = world_->spec.try_cell_of(p);
        slot.grid_node = cell ? world_->tgraph.node_of(*cell) : -1;
        slot.candidates = roads_->candidates(p, n_c_);
        s.slots.push_back(std::move(slot));
    }
    const int want = s.k();
    std::vector<int> padded(tail_);
    while (int(padded.size()) < want) padded.insert(padded.begin(), -1);
    while (int(padded.size()) > want) padded.erase(padded.begin());
    s.matched_tail = std::move(padded);
    s.hidden_traj = h_traj_;
    s.hidden_road = h_road_;

    const std::size_t m = tape_.mark();
    const auto enc = encode_state(tape_, s, reps_, *model_);
    const auto scored = score_state(tape_, enc, model_->attn);
    const auto values = score_values(scored);
    h_traj_.assign(enc.h_next_traj.value().begin(), enc.h_next_traj.value().end());
    h_road_.assign(enc.h_next_road.value().begin(), enc.h_next_road.value().end());
    tape_.reset_to(m);

    const Action a = select_action(s, values);
    std::vector<std::pair<int, int>> out;
    for (int j = 0; j < want; ++j) {
        out.emplace_back(next_point_idx_++, a.segment_id[std::size_t(j)]);
        tail_.push_back(a.segment_id[std::size_t(j)]);
    }
    while (int(tail_.size()) > k_) tail_.erase(tail_.begin());
    pending_.clear();
    return out;
}

std::vector<int> OnlineMatcher::match(const Trajectory& traj,
                                      const LinkConnectionGraph& roads,
                                      const WorldModel& world,
                                      const ModelParams& model, int k, int n_c) {
    OnlineMatcher m(roads, world, model, k, n_c);
    std::vector<int> out(traj.size(), -1);
    auto absorb = [&](const std::vector<std::pair<int, int>>& emitted) {
        for (const auto& [idx, seg] : emitted) out[std::size_t(idx)] = seg;
    };
    for (const auto& p : traj) absorb(m.push_point(p));
    absorb(m.flush());
    return out;
}

}  // namespace rlomm
