#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "eegcopilot/arbitration.hpp"
#include "eegcopilot/gridworld.hpp"

namespace eegcopilot::eval {

struct RunMetrics {
    std::int64_t visible = 0;
    std::int64_t invisible = 0;
    std::int64_t fails = 0;
    std::int64_t blocks = 0;
    std::int64_t human_steps = 0;  // acting agent Human or Shared
    std::int64_t rl_steps = 0;
    double pct_human_action = 0.0;
    double human_workload = 0.0;

    friend bool operator==(const RunMetrics&, const RunMetrics&) = default;
};

/// decisions[i] produced outcomes[i]. Halted steps count toward neither agent.
/// human_workload = N_v / (N_v + N_iv), 0 when no target was reached.
RunMetrics collect_metrics(std::span<const copilot::DecisionRecord> decisions, std::span<const StepOutcome> outcomes);

struct Weights {
    double visible = 1.0;
    double invisible = 10.0;
    double fail = -10.0;
    double block = -5.0;
};

double aggregated_score(const RunMetrics& m, const Weights& w = {});

enum class MergeRule { Sum, Mean };

struct ScoreReport {
    double aggregated = 0.0;
    double score_human_action = 0.0;    // aggregated * (1 + pct_human_action)
    double score_human_workload = 0.0;  // aggregated * (2 - human_workload)
    double final_score = 0.0;
};

ScoreReport adjusted_scores(double aggregated, const RunMetrics& m, MergeRule merge = MergeRule::Sum);

struct WilcoxonResult {
    double w_plus = 0.0;
    double w_minus = 0.0;
    double statistic = 0.0;  // w_plus - w_minus; changes sign when the samples swap
    int n = 0;               // non-zero differences
    double p_two_sided = 1.0;
    bool exact = true;
};

/// Signed-rank test on a - b. Zero differences are dropped and tied absolute
/// differences get averaged ranks. Exact null distribution for n <= 20,
/// normal approximation with tie correction above.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b);

struct Correlation {
    double r = 0.0;
    double p_two_sided = 1.0;
    int n = 0;
};

class StatsError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Sample correlation; p from Student's t with n - 2 degrees of freedom.
Correlation pearson_r(std::span<const double> x, std::span<const double> y);

double mean(std::span<const double> v);
double median(std::vector<double> v);
double sample_sd(std::span<const double> v);

}  // namespace eegcopilot::eval
