#include "rlomm/eval.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>

#include <nlohmann/json.hpp>

namespace rlomm {

namespace {

void check_pair(const std::vector<int>& pred, const std::vector<int>& truth) {
    if (pred.size() != truth.size())
        throw LengthMismatch("prediction length " + std::to_string(pred.size()) +
                             " vs truth length " + std::to_string(truth.size()));
}

}  // namespace

double acct(const std::vector<std::vector<int>>& preds,
            const std::vector<std::vector<int>>& truths) {
    if (preds.size() != truths.size())
        throw LengthMismatch("trajectory count mismatch");
    if (preds.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t t = 0; t < preds.size(); ++t) {
        check_pair(preds[t], truths[t]);
        if (preds[t].empty()) continue;
        int hits = 0;
        for (std::size_t i = 0; i < preds[t].size(); ++i)
            hits += preds[t][i] == truths[t][i];
        sum += double(hits) / double(preds[t].size());
    }
    return sum / double(preds.size());
}

int lcs_length(const std::vector<int>& a, const std::vector<int>& b) {
    std::vector<int> prev(b.size() + 1, 0), cur(b.size() + 1, 0);
    for (std::size_t i = 1; i <= a.size(); ++i) {
        for (std::size_t j = 1; j <= b.size(); ++j) {
            if (a[i - 1] == b[j - 1]) cur[j] = prev[j - 1] + 1;
            else cur[j] = std::max(prev[j], cur[j - 1]);
        }
        std::swap(prev, cur);
    }
    return prev[b.size()];
}

double lcsr(const std::vector<std::vector<int>>& preds,
            const std::vector<std::vector<int>>& truths) {
    if (preds.size() != truths.size())
        throw LengthMismatch("trajectory count mismatch");
    if (preds.empty()) return 0.0;
    double sum = 0.0;
    for (std::size_t t = 0; t < preds.size(); ++t) {
        check_pair(preds[t], truths[t]);
        if (preds[t].empty()) continue;
        sum += double(lcs_length(preds[t], truths[t])) / double(preds[t].size());
    }
    return sum / double(preds.size());
}

double median(std::vector<double> v) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const std::size_t m = v.size() / 2;
    return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

MatchReport build_report(const std::string& method,
                         const std::vector<std::vector<int>>& preds,
                         const Dataset& truth) {
    MatchReport r;
    r.method = method;
    for (std::size_t t = 0; t < preds.size(); ++t) {
        r.per_traj_acct.push_back(acct({preds[t]}, {truth[t].truth}));
        r.per_traj_lcsr.push_back(lcsr({preds[t]}, {truth[t].truth}));
    }
    std::vector<std::vector<int>> truths;
    for (const auto& t : truth) truths.push_back(t.truth);
    r.mean_acct = acct(preds, truths);
    r.mean_lcsr = lcsr(preds, truths);
    return r;
}

std::string MatchReport::to_json() const {
    nlohmann::json j{{"method", method},
                     {"mean_AccT", mean_acct},
                     {"mean_LCSR", mean_lcsr},
                     {"per_traj_AccT", per_traj_acct},
                     {"per_traj_LCSR", per_traj_lcsr},
                     {"latency_ratio", latency_ratio},
                     {"peak_memory_mb", peak_memory_mb}};
    if (!step_latency_ns.empty()) j["step_latency_ns"] = step_latency_ns;
    return j.dump(2);
}

std::string MatchReport::to_table() const {
    char buf[256];
    std::string out = "method      AccT    LCSR    trajectories\n";
    std::snprintf(buf, sizeof buf, "%-10s  %.4f  %.4f  %zu\n", method.c_str(),
                  mean_acct, mean_lcsr, per_traj_acct.size());
    out += buf;
    if (latency_ratio > 0) {
        std::snprintf(buf, sizeof buf, "latency ratio (late/early medians): %.3f\n",
                      latency_ratio);
        out += buf;
    }
    return out;
}

LatencySummary latency_harness(
    const std::function<std::function<void(int)>()>& matcher_factory, int steps,
    int warmup_runs) {
    using clock = std::chrono::steady_clock;
    for (int w = 0; w < warmup_runs; ++w) {
        auto step = matcher_factory();
        for (int i = 0; i < steps; ++i) step(i);
    }

    LatencySummary s;
    auto step = matcher_factory();
    s.step_ns.reserve(std::size_t(steps));
    for (int i = 0; i < steps; ++i) {
        const auto t0 = clock::now();
        step(i);
        const auto t1 = clock::now();
        s.step_ns.push_back(
            double(std::chrono::duration_cast<std::chrono::nanoseconds>(t1 - t0).count()));
    }
    if (steps >= 100) {
        const std::vector<double> early(s.step_ns.begin() + 10, s.step_ns.begin() + 20);
        const std::vector<double> late(s.step_ns.begin() + 90, s.step_ns.begin() + 100);
        const double e = median(early);
        if (e > 0) s.ratio = median(late) / e;
    }
    return s;
}

}  // namespace rlomm
