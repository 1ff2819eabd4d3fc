#pragma once

#include <functional>
#include <string>
#include <vector>

#include "rlomm/data.hpp"

namespace rlomm {

struct LengthMismatch : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Mean over trajectories of the per-trajectory exact-position match
/// fraction.
double acct(const std::vector<std::vector<int>>& preds,
            const std::vector<std::vector<int>>& truths);

/// Longest common subsequence length, O(l^2) dynamic program.
int lcs_length(const std::vector<int>& a, const std::vector<int>& b);

/// Mean over trajectories of LCS(pred, truth) / length.
double lcsr(const std::vector<std::vector<int>>& preds,
            const std::vector<std::vector<int>>& truths);

struct MatchReport {
    std::string method;
    std::vector<double> per_traj_acct;
    std::vector<double> per_traj_lcsr;
    double mean_acct = 0.0;
    double mean_lcsr = 0.0;
    std::vector<double> step_latency_ns;
    double latency_ratio = 0.0;  // 0 when no latency run was taken
    double peak_memory_mb = 0.0;

    std::string to_json() const;
    std::string to_table() const;
};

MatchReport build_report(const std::string& method,
                         const std::vector<std::vector<int>>& preds,
                         const Dataset& truth);

/// Times one full pass of per-step calls after `warmup_runs` untimed passes
/// over fresh instances from the factory. step(i) must process stream
/// position i.
struct LatencySummary {
    std::vector<double> step_ns;  // one per stream position
    /// median over positions [90, 100) divided by median over [10, 20);
    /// 0 when the stream is shorter than 100 steps.
    double ratio = 0.0;
};
LatencySummary latency_harness(
    const std::function<std::function<void(int)>()>& matcher_factory, int steps,
    int warmup_runs = 1);

double median(std::vector<double> v);

}  // namespace rlomm
