#include "rlomm/omdp.hpp"

#include <algorithm>

namespace rlomm {

EpisodePlan plan_episode(const Trajectory& traj, const LinkConnectionGraph& roads,
                         int n_c, const GridSpec& spec,
                         const TrajectoryTransitionGraph& tgraph,
                         const std::vector<int>* truth) {
    if (traj.empty()) throw EmptyTrajectory("trajectory has no points");
    EpisodePlan plan;
    plan.points = traj;
    plan.grid_node.reserve(traj.size());
    plan.candidates.reserve(traj.size());
    for (const auto& p : traj) {
        const auto cell = spec.try_cell_of(p);
        plan.grid_node.push_back(cell ? tgraph.node_of(*cell) : -1);
        plan.candidates.push_back(roads.candidates(p, n_c));
    }
    if (truth) {
        if (truth->size() != traj.size())
            throw std::invalid_argument("truth/trajectory length mismatch");
        plan.truth = *truth;
    }
    return plan;
}

namespace {

std::vector<StateSlot> slots_for(const EpisodePlan& plan, int offset, int k) {
    std::vector<StateSlot> slots;
    for (int j = offset; j < int(plan.length()) && j < offset + k; ++j) {
        StateSlot s;
        s.point = plan.points[j];
        s.grid_node = plan.grid_node[j];
        s.candidates = plan.candidates[j];
        s.truth = plan.truth.empty() ? -1 : plan.truth[j];
        slots.push_back(std::move(s));
    }
    return slots;
}

}  // namespace

State init_episode(const EpisodePlan& plan, int k, int hidden_width) {
    if (plan.length() == 0) throw EmptyTrajectory("empty episode plan");
    State s;
    s.step_index = 0;
    s.point_offset = 0;
    s.slots = slots_for(plan, 0, k);
    s.matched_tail.assign(s.slots.size(), -1);
    s.hidden_traj.assign(hidden_width, 0.0);
    s.hidden_road.assign(hidden_width, 0.0);
    return s;
}

Action select_action(const State& state, const std::vector<std::vector<double>>& scores,
                     double epsilon, std::mt19937_64* rng) {
    if (scores.size() != state.slots.size())
        throw std::invalid_argument("scores/slots mismatch");
    Action a;
    for (std::size_t j = 0; j < scores.size(); ++j) {
        const auto& cands = state.slots[j].candidates;
        if (cands.empty() || scores[j].size() != cands.size())
            throw NoValidCandidate("slot has no scored candidates");
        int best = 0;
        if (epsilon > 0.0 && rng &&
            std::uniform_real_distribution<double>(0.0, 1.0)(*rng) < epsilon) {
            best = int(std::uniform_int_distribution<std::size_t>(0, cands.size() - 1)(*rng));
        } else {
            for (std::size_t c = 1; c < scores[j].size(); ++c)
                if (scores[j][c] > scores[j][best]) best = int(c);
        }
        a.candidate_index.push_back(best);
        a.segment_id.push_back(cands[best].segment_id);
    }
    return a;
}

std::pair<double, std::vector<SlotReward>> compute_reward(
    const Action& action, const State& state, EpisodeContext& ctx,
    const LinkConnectionGraph& roads, const RewardConfig& cfg) {
    std::vector<SlotReward> breakdown;
    double total = 0.0;
    for (std::size_t n = 0; n < state.slots.size(); ++n) {
        const int chosen = action.segment_id[n];
        const int truth = state.slots[n].truth;
        if (truth < 0) throw MissingGroundTruth("reward requires labeled slots");
        const bool correct = chosen == truth;

        SlotReward r;
        r.r_ac = correct ? 1.0 : -1.0;
        if (correct && ctx.streak >= cfg.streak_threshold) r.r_cs = cfg.alpha;
        if (!correct &&
            std::find(ctx.history.begin(), ctx.history.end(), chosen) != ctx.history.end())
            r.r_dp = -cfg.beta;
        if (ctx.prev_segment >= 0) {
            // Hop distance along the travel direction, clamped to >= 1;
            // unreachable within cutoff earns nothing.
            const auto delta =
                roads.connectivity_delta(ctx.prev_segment, chosen, cfg.connectivity_cutoff);
            if (delta) r.r_rc = cfg.gamma_rc / double(*delta);
        }

        ctx.streak = correct ? ctx.streak + 1 : 0;
        if (std::find(ctx.history.begin(), ctx.history.end(), chosen) == ctx.history.end()) {
            ctx.history.push_back(chosen);
            if (int(ctx.history.size()) > cfg.history_capacity) ctx.history.pop_front();
        }
        ctx.prev_segment = chosen;

        total += r.total();
        breakdown.push_back(r);
    }
    return {total, std::move(breakdown)};
}

State env_step(const State& state, const Action& action, const EpisodePlan& plan,
               const std::vector<double>& hidden_traj_next,
               const std::vector<double>& hidden_road_next, int k, bool& done) {
    const int next_offset = state.point_offset + state.k();
    done = next_offset >= int(plan.length());
    State next;
    next.step_index = state.step_index + 1;
    next.point_offset = next_offset;
    next.hidden_traj = hidden_traj_next;
    next.hidden_road = hidden_road_next;
    if (!done) {
        next.slots = slots_for(plan, next_offset, k);
        // Tail of the matched prefix: the most recent choices, slot-aligned,
        // in chronological order, -1 left-padded at episode start.
        const int want = int(next.slots.size());
        std::vector<int> all(state.matched_tail);
        all.insert(all.end(), action.segment_id.begin(), action.segment_id.end());
        std::vector<int> tail;
        for (int j = std::max(0, int(all.size()) - want); j < int(all.size()); ++j)
            tail.push_back(all[j]);
        while (int(tail.size()) < want) tail.insert(tail.begin(), -1);
        next.matched_tail = std::move(tail);
    }
    return next;
}

}  // namespace rlomm
