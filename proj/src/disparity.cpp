#include "eegcopilot/disparity.hpp"

#include <algorithm>
#include <stdexcept>
#include <thread>
#include <vector>

namespace eegcopilot::copilot {

namespace {

void check_unit(double v, const char* name) {
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument(std::string(name) + " must lie in [0, 1]");
}

}  // namespace

DisparityModel DisparityModel::derive(double d, double w1e, double p_block, double acc_e1, double acc_e2) {
    check_unit(d, "d");
    check_unit(w1e, "W1e");
    check_unit(p_block, "P_block");
    check_unit(acc_e1, "Acc_e1");
    check_unit(acc_e2, "Acc_e2");
    DisparityModel m;
    m.d = d;
    m.w1e = w1e;
    m.p_block = p_block;
    m.acc_e1 = acc_e1;
    m.acc_e2 = acc_e2;
    m.acc_pp = acc_e2;
    m.w1r = w1e * (1.0 - d);
    m.w2 = (1.0 - d) * (1.0 - w1e);
    m.w3e = d * (1.0 - w1e);
    m.w3r = m.w3e * (1.0 - d);
    m.w4r = p_block * (w1e + m.w3e);
    m.w5e = (1.0 - p_block) * (w1e + m.w3e);
    return m;
}

Authority authority(const DisparityModel& m) {
    return {1.0 - m.w4r, m.w1r + m.w2 + m.w3r + m.w4r};
}

double copilot_accuracy(const DisparityModel& m) {
    return ((m.w1e + m.w2) * m.acc_e1 + m.w3e * m.acc_e2) * (1.0 - m.p_block);
}

DisparityModel estimate_model_from_data(std::span<const eeg::ClassifiedTrial> pool, double d, double p_block) {
    if (pool.empty()) throw std::invalid_argument("estimate_model_from_data: empty pool");
    double agree = 0.0, either = 0.0, fused = 0.0;
    for (const auto& t : pool) {
        agree += t.label_fc == t.label_bp;
        either += t.label_fc == t.label_true || t.label_bp == t.label_true;
        fused += index_of(eeg::fuse_posteriors(t.posterior_fc, t.posterior_bp).action) == t.label_true;
    }
    const double n = static_cast<double>(pool.size());
    return DisparityModel::derive(d, agree / n, p_block, either / n, fused / n);
}

DisparityModel estimate_model_from_data(const human::SurrogateSpec& spec, double d, double p_block) {
    const auto s = human::surrogate_stats(spec);
    return DisparityModel::derive(d, s.agreement, p_block, s.union_accuracy, s.fused_accuracy);
}

namespace {

struct Tally {
    std::uint64_t human_loss = 0;  // W4r events
    std::uint64_t rl_credit = 0;   // summed W1r, W2, W3r, W4r indicators
    std::uint64_t correct = 0;
};

Tally sample_stream(const DisparityModel& m, std::uint64_t n, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto bern = [&](double p) { return u(rng) < p; };
    Tally t;
    for (std::uint64_t i = 0; i < n; ++i) {
        const bool blocked = bern(m.p_block);
        bool accurate;
        bool human_layer;  // layers 1 and 3 carry a human-originated candidate
        if (bern(m.w1e)) {
            human_layer = true;
            t.rl_credit += bern(1.0 - m.d);  // W1r
            accurate = bern(m.acc_e1);
        } else if (bern(1.0 - m.d)) {
            human_layer = false;
            t.rl_credit += 1;  // W2
            accurate = bern(m.acc_e1);
        } else {
            human_layer = true;
            t.rl_credit += bern(1.0 - m.d);  // W3r
            accurate = bern(m.acc_e2);
        }
        if (human_layer && blocked) {
            ++t.human_loss;
            ++t.rl_credit;  // W4r
        }
        t.correct += accurate && !blocked;
    }
    return t;
}

}  // namespace

MonteCarloEstimate monte_carlo_authority(const DisparityModel& m, std::uint64_t n_samples, std::uint64_t seed,
                                         int streams, int threads) {
    if (n_samples < 10'000) throw std::invalid_argument("monte_carlo_authority: need at least 10^4 samples");
    if (streams < 1) throw std::invalid_argument("monte_carlo_authority: need at least one stream");
    const auto s_count = static_cast<std::size_t>(streams);
    std::vector<Tally> tallies(s_count);
    auto run = [&](std::size_t s) {
        std::seed_seq seq{seed, static_cast<std::uint64_t>(s)};
        Rng rng(seq);
        const std::uint64_t share = n_samples / s_count + (s < n_samples % s_count ? 1 : 0);
        tallies[s] = sample_stream(m, share, rng);
    };
    const auto workers = static_cast<std::size_t>(std::clamp(threads, 1, streams));
    if (workers == 1) {
        for (std::size_t s = 0; s < s_count; ++s) run(s);
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < workers; ++w) {
            pool.emplace_back([&, w] {
                for (std::size_t s = w; s < s_count; s += workers) run(s);
            });
        }
        for (auto& th : pool) th.join();
    }
    Tally total;
    for (const auto& t : tallies) {
        total.human_loss += t.human_loss;
        total.rl_credit += t.rl_credit;
        total.correct += t.correct;
    }
    const double n = static_cast<double>(n_samples);
    return {1.0 - static_cast<double>(total.human_loss) / n, static_cast<double>(total.rl_credit) / n,
            static_cast<double>(total.correct) / n, n_samples};
}

}  // namespace eegcopilot::copilot
