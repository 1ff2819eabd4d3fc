#include "rlomm/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace rlomm {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Reverse-lexicographic comparison of index sequences: the later elements
// dominate, matching how Viterbi back-links resolve ties (smallest final
// candidate first, then smallest predecessor, and so on).
bool rev_lex_less(std::span<const int> a, std::span<const int> b) {
    for (std::size_t i = a.size(); i-- > 0;) {
        if (a[i] != b[i]) return a[i] < b[i];
    }
    return false;
}

}  // namespace

double HmmScorer::transition(int prev_seg, int cur_seg, const GeoPoint& prev_p,
                             const GeoPoint& cur_p) const {
    const auto h = roads_->hops(prev_seg, cur_seg, cfg_.hop_cutoff);
    if (!h) return kNegInf;
    const double route_m = static_cast<double>(*h) * roads_->mean_segment_length_m();
    const double straight_m = haversine_m(prev_p, cur_p);
    return -std::abs(route_m - straight_m) / cfg_.beta_m;
}

std::vector<int> HmmOnlineMatcher::push_point(const GeoPoint& p) {
    CandidateSet cands = roads_->candidates(p, scorer_.config().n_c);
    if (cands.empty()) throw NoCandidates("no candidate segments near point");

    const std::size_t col = columns_.size();
    std::vector<double> score(cands.size(), kNegInf);
    std::vector<int> back(cands.size(), -1);
    if (col == 0) {
        for (std::size_t c = 0; c < cands.size(); ++c)
            score[c] = scorer_.emission(cands[c]);
    } else {
        const auto& prev_cands = columns_.back();
        const auto& prev_score = best_.back();
        for (std::size_t c = 0; c < cands.size(); ++c) {
            for (std::size_t pidx = 0; pidx < prev_cands.size(); ++pidx) {
                if (prev_score[pidx] == kNegInf) continue;
                const double t = scorer_.transition(prev_cands[pidx].segment_id,
                                                    cands[c].segment_id,
                                                    points_.back(), p);
                const double s = prev_score[pidx] + t;
                if (s > score[c]) {
                    score[c] = s;
                    back[c] = static_cast<int>(pidx);
                }
            }
            if (score[c] > kNegInf) score[c] += scorer_.emission(cands[c]);
        }
        // A fully disconnected column restarts the lattice rather than
        // poisoning everything downstream.
        if (std::ranges::all_of(score, [](double s) { return s == kNegInf; })) {
            for (std::size_t c = 0; c < cands.size(); ++c) {
                score[c] = scorer_.emission(cands[c]);
                back[c] = 0;
            }
        }
    }

    columns_.push_back(std::move(cands));
    best_.push_back(std::move(score));
    backlink_.push_back(std::move(back));
    points_.push_back(p);

    std::vector<int> emitted;
    if (col > 0) {
        const auto& s = best_.back();
        const std::size_t arg =
            std::distance(s.begin(), std::ranges::max_element(s));
        const int prev_idx = backlink_.back()[arg];
        emitted.push_back(columns_[col - 1][static_cast<std::size_t>(prev_idx)].segment_id);
    }
    return emitted;
}

std::vector<int> HmmOnlineMatcher::flush() {
    std::vector<int> emitted;
    if (columns_.empty()) return emitted;
    const auto& s = best_.back();
    const std::size_t arg = std::distance(s.begin(), std::ranges::max_element(s));
    emitted.push_back(columns_.back()[arg].segment_id);
    return emitted;
}

std::vector<int> HmmOnlineMatcher::decode() const {
    std::vector<int> out(columns_.size(), -1);
    if (columns_.empty()) return out;
    const auto& last = best_.back();
    int idx = static_cast<int>(
        std::distance(last.begin(), std::ranges::max_element(last)));
    for (std::size_t col = columns_.size(); col-- > 0;) {
        out[col] = columns_[col][static_cast<std::size_t>(idx)].segment_id;
        idx = backlink_[col][static_cast<std::size_t>(idx)];
    }
    return out;
}

std::vector<int> HmmOnlineMatcher::match(const Trajectory& traj,
                                         const LinkConnectionGraph& roads,
                                         HmmConfig cfg) {
    HmmOnlineMatcher m(roads, cfg);
    for (const auto& p : traj) m.push_point(p);
    return m.decode();
}

double hmm_sequence_score(const std::vector<CandidateSet>& candidates,
                          const std::vector<GeoPoint>& points,
                          std::span<const int> choice, const HmmScorer& scorer) {
    double total = 0.0;
    for (std::size_t i = 0; i < choice.size(); ++i) {
        const auto& c = candidates[i][static_cast<std::size_t>(choice[i])];
        if (i > 0) {
            const auto& prev =
                candidates[i - 1][static_cast<std::size_t>(choice[i - 1])];
            total += scorer.transition(prev.segment_id, c.segment_id,
                                       points[i - 1], points[i]);
            if (total == kNegInf) return kNegInf;
        }
        total += scorer.emission(c);
    }
    return total;
}

std::vector<int> brute_force_best_path(
    const std::vector<CandidateSet>& candidates,
    const std::function<double(std::span<const int>)>& sequence_score) {
    if (candidates.empty()) return {};
    double combos = 1.0;
    for (const auto& col : candidates) {
        if (col.empty()) throw NoCandidates("empty candidate column");
        combos *= static_cast<double>(col.size());
        if (combos > 1e6) throw TooLarge("more than 1e6 candidate sequences");
    }

    std::vector<int> choice(candidates.size(), 0);
    std::vector<int> best_choice;
    double best_score = kNegInf;
    while (true) {
        const double s = sequence_score(choice);
        if (s > best_score ||
            (s == best_score && best_score != kNegInf &&
             rev_lex_less(choice, best_choice))) {
            best_score = s;
            best_choice = choice;
        }
        std::size_t i = candidates.size();
        while (i-- > 0) {
            if (++choice[i] < static_cast<int>(candidates[i].size())) break;
            choice[i] = 0;
            if (i == 0) {
                if (best_choice.empty()) best_choice = choice;
                return best_choice;
            }
        }
    }
}

std::vector<int> mdp_value_iteration_match(const Trajectory& traj,
                                           const LinkConnectionGraph& roads,
                                           const MdpConfig& cfg,
                                           bool* converged) {
    if (traj.empty()) {
        if (converged) *converged = true;
        return {};
    }
    std::vector<CandidateSet> cols;
    cols.reserve(traj.size());
    for (const auto& p : traj) {
        auto c = roads.candidates(p, cfg.n_c);
        if (c.empty()) throw NoCandidates("no candidate segments near point");
        cols.push_back(std::move(c));
    }

    // Immediate reward for occupying a candidate, plus a continuity bonus on
    // the transition taken to reach the next one.
    auto occupancy = [&](const Candidate& c) { return -c.distance_m; };
    auto continuity = [&](int u, int v) {
        const auto d = roads.connectivity_delta(u, v, cfg.hop_cutoff);
        if (!d) return -cfg.connectivity_bonus;
        return cfg.connectivity_bonus / static_cast<double>(*d);
    };

    std::vector<std::vector<double>> value(cols.size());
    for (std::size_t i = 0; i < cols.size(); ++i)
        value[i].assign(cols[i].size(), 0.0);

    bool ok = false;
    for (int sweep = 0; sweep < cfg.max_sweeps; ++sweep) {
        double delta = 0.0;
        for (std::size_t i = cols.size(); i-- > 0;) {
            for (std::size_t c = 0; c < cols[i].size(); ++c) {
                double v = occupancy(cols[i][c]);
                if (i + 1 < cols.size()) {
                    double best_next = kNegInf;
                    for (std::size_t n = 0; n < cols[i + 1].size(); ++n) {
                        const double q = continuity(cols[i][c].segment_id,
                                                    cols[i + 1][n].segment_id) +
                                         value[i + 1][n];
                        best_next = std::max(best_next, q);
                    }
                    // The continuity reward lands on arrival at the next
                    // point, so the whole lookahead is discounted once.
                    v += cfg.discount * best_next;
                }
                delta = std::max(delta, std::abs(v - value[i][c]));
                value[i][c] = v;
            }
        }
        if (delta < cfg.tolerance) {
            ok = true;
            break;
        }
    }
    if (converged) *converged = ok;

    // Greedy rollout from the first point.
    std::vector<int> out(cols.size(), -1);
    std::size_t cur = 0;
    for (std::size_t c = 1; c < cols[0].size(); ++c)
        if (value[0][c] > value[0][cur]) cur = c;
    out[0] = cols[0][cur].segment_id;
    for (std::size_t i = 1; i < cols.size(); ++i) {
        std::size_t pick = 0;
        double best_q = kNegInf;
        for (std::size_t n = 0; n < cols[i].size(); ++n) {
            const double q = continuity(out[i - 1], cols[i][n].segment_id) +
                             value[i][n];
            if (q > best_q) {
                best_q = q;
                pick = n;
            }
        }
        out[i] = cols[i][pick].segment_id;
    }
    return out;
}

std::vector<int> greedy_nearest_match(const Trajectory& traj,
                                      const LinkConnectionGraph& roads) {
    std::vector<int> out;
    out.reserve(traj.size());
    for (const auto& p : traj) {
        auto c = roads.candidates(p, 1);
        if (c.empty()) throw NoCandidates("no candidate segments near point");
        out.push_back(c.front().segment_id);
    }
    return out;
}

}  // namespace rlomm
