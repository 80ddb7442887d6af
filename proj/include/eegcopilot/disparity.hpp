#pragma once

#include <cstdint>
#include <span>

#include "eegcopilot/eeg.hpp"
#include "eegcopilot/human_agent.hpp"

namespace eegcopilot::copilot {

/// Disparity-index model. Only w1e, d, p_block and the accuracies are free;
/// the remaining weights follow from them (see derive()).
struct DisparityModel {
    double d = 0.0;
    double w1e = 0.0;
    double w1r = 0.0;
    double w2 = 0.0;
    double w3e = 0.0;
    double w3r = 0.0;
    double w4r = 0.0;
    double w5e = 0.0;
    double p_block = 0.0;
    double acc_e1 = 0.0;  // P(a_fc or a_bp correct)
    double acc_e2 = 0.0;  // P(a_pp correct)
    double acc_pp = 0.0;

    /// Fills the dependent weights from d, w1e and p_block; validates ranges.
    static DisparityModel derive(double d, double w1e, double p_block, double acc_e1, double acc_e2);
};

struct Authority {
    double human = 0.0;  // Ath_e
    double rl = 0.0;     // Ath_r
};

/// Ath_e = 1 - W4r; Ath_r = W1r + W2 + W3r + W4r.
Authority authority(const DisparityModel& m);

/// ((W1e + W2) Acc_e1 + W3e Acc_e2) (1 - P_block).
double copilot_accuracy(const DisparityModel& m);

/// W1e, Acc_e1 and Acc_e2 from held-out classifications.
DisparityModel estimate_model_from_data(std::span<const eeg::ClassifiedTrial> pool, double d, double p_block);
DisparityModel estimate_model_from_data(const human::SurrogateSpec& spec, double d, double p_block);

struct MonteCarloEstimate {
    double ath_e = 0.0;
    double ath_r = 0.0;
    double acc_c = 0.0;
    std::uint64_t samples = 0;
};

/// Samples the layered agreement/match/block process behind the closed
/// forms. n_samples is split over `streams` independent generators seeded from
/// `seed`; the result does not depend on the thread count.
MonteCarloEstimate monte_carlo_authority(const DisparityModel& m, std::uint64_t n_samples, std::uint64_t seed,
                                         int streams = 8, int threads = 1);

}  // namespace eegcopilot::copilot
