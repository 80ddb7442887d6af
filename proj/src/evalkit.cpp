#include "eegcopilot/evalkit.hpp"

#include <boost/math/distributions/students_t.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace eegcopilot::eval {

RunMetrics collect_metrics(std::span<const copilot::DecisionRecord> decisions, std::span<const StepOutcome> outcomes) {
    if (decisions.size() != outcomes.size()) throw std::invalid_argument("collect_metrics: log lengths differ");
    RunMetrics m;
    for (std::size_t i = 0; i < decisions.size(); ++i) {
        const auto& d = decisions[i];
        const auto& o = outcomes[i];
        m.visible += o.reached_visible;
        m.invisible += o.reached_invisible;
        m.fails += o.failed;
        m.blocks += d.blocked;
        switch (d.acting_agent) {
            case copilot::ActingAgent::Human:
            case copilot::ActingAgent::Shared: ++m.human_steps; break;
            case copilot::ActingAgent::RL: ++m.rl_steps; break;
            case copilot::ActingAgent::None: break;
        }
    }
    const auto acted = m.human_steps + m.rl_steps;
    m.pct_human_action = acted ? static_cast<double>(m.human_steps) / static_cast<double>(acted) : 0.0;
    const auto reached = m.visible + m.invisible;
    m.human_workload = reached ? static_cast<double>(m.visible) / static_cast<double>(reached) : 0.0;
    return m;
}

double aggregated_score(const RunMetrics& m, const Weights& w) {
    return w.visible * static_cast<double>(m.visible) + w.invisible * static_cast<double>(m.invisible) +
           w.fail * static_cast<double>(m.fails) + w.block * static_cast<double>(m.blocks);
}

ScoreReport adjusted_scores(double aggregated, const RunMetrics& m, MergeRule merge) {
    ScoreReport s;
    s.aggregated = aggregated;
    s.score_human_action = aggregated * (1.0 + m.pct_human_action);
    s.score_human_workload = aggregated * (2.0 - m.human_workload);
    s.final_score = s.score_human_action + s.score_human_workload;
    if (merge == MergeRule::Mean) s.final_score *= 0.5;
    return s;
}

namespace {

// Averaged ranks of |v|, 1-based.
std::vector<double> average_ranks(const std::vector<double>& absval) {
    const std::size_t n = absval.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return absval[a] < absval[b]; });
    std::vector<double> ranks(n);
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && absval[order[j + 1]] == absval[order[i]]) ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double normal_upper(double z) { return 0.5 * std::erfc(z / std::sqrt(2.0)); }

}  // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw StatsError("wilcoxon_signed_rank: samples differ in length");
    std::vector<double> diff;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double d = a[i] - b[i];
        if (d != 0.0) diff.push_back(d);
    }
    WilcoxonResult res;
    res.n = static_cast<int>(diff.size());
    if (diff.empty()) return res;

    std::vector<double> absval(diff.size());
    std::transform(diff.begin(), diff.end(), absval.begin(), [](double d) { return std::abs(d); });
    const std::vector<double> ranks = average_ranks(absval);
    for (std::size_t i = 0; i < diff.size(); ++i) (diff[i] > 0 ? res.w_plus : res.w_minus) += ranks[i];
    res.statistic = res.w_plus - res.w_minus;

    const int n = res.n;
    if (n <= 20) {
        // Doubled ranks are integers even with ties; count sign patterns by the
        // doubled positive-rank sum.
        std::vector<int> doubled(ranks.size());
        std::transform(ranks.begin(), ranks.end(), doubled.begin(), [](double r) { return static_cast<int>(std::lround(2.0 * r)); });
        const int total = std::accumulate(doubled.begin(), doubled.end(), 0);
        std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
        count[0] = 1.0;
        int reach = 0;
        for (int r : doubled) {
            reach += r;
            for (int s = reach; s >= r; --s) count[static_cast<std::size_t>(s)] += count[static_cast<std::size_t>(s - r)];
        }
        const int observed = static_cast<int>(std::lround(2.0 * res.w_plus));
        double lower = 0.0, upper = 0.0;
        for (int s = 0; s <= total; ++s) {
            if (s <= observed) lower += count[static_cast<std::size_t>(s)];
            if (s >= observed) upper += count[static_cast<std::size_t>(s)];
        }
        const double patterns = std::ldexp(1.0, n);
        res.p_two_sided = std::min(1.0, 2.0 * std::min(lower, upper) / patterns);
        res.exact = true;
        return res;
    }

    const double nn = static_cast<double>(n);
    double tie_term = 0.0;
    std::vector<double> sorted = absval;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size();) {
        std::size_t j = i;
        while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
        const double t = static_cast<double>(j - i + 1);
        tie_term += t * t * t - t;
        i = j + 1;
    }
    const double mu = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    res.exact = false;
    if (var <= 0.0) return res;
    const double z = (res.w_plus - mu) / std::sqrt(var);
    res.p_two_sided = std::min(1.0, 2.0 * normal_upper(std::abs(z)));
    return res;
}

Correlation pearson_r(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw StatsError("pearson_r: samples differ in length");
    if (x.size() < 3) throw StatsError("pearson_r: need at least 3 points");
    const double mx = mean(x), my = mean(y);
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx, dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if (sxx == 0.0 || syy == 0.0) throw StatsError("pearson_r: zero variance");
    Correlation c;
    c.n = static_cast<int>(x.size());
    c.r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    const double dof = static_cast<double>(c.n - 2);
    if (std::abs(c.r) >= 1.0) {
        c.p_two_sided = 0.0;
        return c;
    }
    const double t = c.r * std::sqrt(dof / (1.0 - c.r * c.r));
    const boost::math::students_t dist(dof);
    c.p_two_sided = std::min(1.0, 2.0 * boost::math::cdf(boost::math::complement(dist, std::abs(t))));
    return c;
}

double mean(std::span<const double> v) {
    if (v.empty()) throw StatsError("mean of an empty sample");
    return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double median(std::vector<double> v) {
    if (v.empty()) throw StatsError("median of an empty sample");
    std::sort(v.begin(), v.end());
    const std::size_t h = v.size() / 2;
    return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double sample_sd(std::span<const double> v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double ss = 0.0;
    for (double x : v) ss += (x - m) * (x - m);
    return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace eegcopilot::eval
