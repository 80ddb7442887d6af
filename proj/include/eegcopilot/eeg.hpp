#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "eegcopilot/gridworld.hpp"

namespace eegcopilot::eeg {

inline constexpr int kNumClasses = 4;
inline constexpr int kNumBands = 5;

using Posterior = std::array<double, kNumClasses>;

class EegError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One recording segment, channels x samples. Labels 0..3 map onto
/// Left, Right, Up, Down (left hand, right hand, left foot, right foot).
struct Trial {
    Eigen::MatrixXd data;
    double fs = 200.0;
    int label = 0;

    int channels() const { return static_cast<int>(data.rows()); }
    int samples() const { return static_cast<int>(data.cols()); }
};

struct Band {
    const char* name;
    double low;   // inclusive, Hz
    double high;  // exclusive, Hz
};

/// delta, theta, alpha, beta, gamma. The 7-8 Hz and 13-14 Hz gaps belong to no band.
inline constexpr std::array<Band, kNumBands> kBands = {{
    {"delta", 1.0, 4.0},
    {"theta", 4.0, 7.0},
    {"alpha", 8.0, 13.0},
    {"beta", 14.0, 30.0},
    {"gamma", 30.0, 100.0},
}};

/// Pairwise Pearson correlation between channels. Throws EegError naming the
/// first zero-variance channel.
Eigen::MatrixXd pearson_fc(const Trial& trial);

/// Strict upper triangle, row-major: N(N-1)/2 entries.
Eigen::VectorXd upper_triangle(const Eigen::MatrixXd& m);

/// Raw one-sided periodogram |sum_n x_n exp(-i 2 pi f dt n)|^2 summed per band,
/// non-DC/non-Nyquist bins doubled. Rows are bands, columns channels.
Eigen::MatrixXd band_power(const Trial& trial);

Eigen::VectorXd fc_features(const Trial& trial);
/// band_power flattened band-major: (band 0, ch 0..N-1), (band 1, ...), ...
Eigen::VectorXd bp_features(const Trial& trial);

/// Shared-covariance Gaussian classifier with shrinkage toward a scaled identity.
struct LdaModel {
    std::vector<Eigen::VectorXd> means;
    Eigen::VectorXd priors;
    Eigen::MatrixXd covariance;  // shrunken
    Eigen::LLT<Eigen::MatrixXd> factor;
    double lambda = 0.1;

    int classes() const { return static_cast<int>(means.size()); }
    int dimension() const { return means.empty() ? 0 : static_cast<int>(means.front().size()); }
};

LdaModel lda_fit(std::span<const Eigen::VectorXd> features, std::span<const int> labels, double lambda,
                 int n_classes = kNumClasses);

/// Softmax of log prior - half Mahalanobis distance to each class mean.
Eigen::VectorXd lda_posterior(const LdaModel& model, const Eigen::VectorXd& x);

/// Lowest-index argmax.
int argmax(std::span<const double> v);

struct ClassifiedTrial {
    std::size_t trial_index = 0;  // position in the input sequence
    int label_true = 0;
    int label_fc = 0;
    int label_bp = 0;
    Posterior posterior_fc{};
    Posterior posterior_bp{};

    friend bool operator==(const ClassifiedTrial&, const ClassifiedTrial&) = default;
};

struct FusedDecision {
    Action action = Action::Left;
    Posterior posterior{};
};

/// Elementwise mean of the two posteriors; argmax with ties to the lowest index.
FusedDecision fuse_posteriors(const Posterior& fc, const Posterior& bp);

/// Stratified k-fold classification with FC-LDA and BP-LDA. Trials are
/// sorted by (label, input index) and shuffled within class with `seed`
/// before fold assignment; every trial is classified exactly once while held
/// out. Features are z-scored with training-fold statistics. Output is ordered
/// by (label, input index).
std::vector<ClassifiedTrial> crossval_classify(std::span<const Trial> trials, double lambda, int folds,
                                               std::uint64_t seed);

struct AccuracySummary {
    double fc = 0.0;
    double bp = 0.0;
    double fused = 0.0;
    std::size_t trials = 0;
};

AccuracySummary summarize(std::span<const ClassifiedTrial> classified);

struct SyntheticConfig {
    int channels = 19;
    double fs = 200.0;
    int samples = 200;
    int trials_per_class = 60;
    /// Scale of the pink-noise background; 0 leaves only the structured signal.
    double noise_level = 1.0;
    /// Amplitude of the class-specific oscillation on the class channel subset.
    double oscillation_amplitude = 2.0;
    /// Per-class oscillation frequency (Hz).
    std::array<double, kNumClasses> oscillation_hz = {10.0, 11.5, 20.0, 24.0};
    /// Weight of the latent source shared by the class coupling group.
    double coupling_weight = 1.5;
    /// Amplitude of the random-phase baseline rhythm present on every channel.
    double baseline_amplitude = 1.0;

    void validate() const;
};

/// Each class carries an oscillation on its own channel subset (band power
/// information) and a shared latent source across its own channel group
/// (connectivity information), over a pink-noise background.
std::vector<Trial> gen_synthetic_eeg(const SyntheticConfig& config, Rng& rng);

/// Text format:
///   channels=<int> fs=<float> trials=<int>
///   then per trial: label=<int> samples=<int>
///   followed by <channels> lines of <samples> space-separated floats.
/// Blank lines and lines starting with '#' are ignored.
void write_trials(std::ostream& out, std::span<const Trial> trials);

class ParseError : public std::runtime_error {
public:
    ParseError(const std::string& what, std::size_t line, std::size_t column);
    std::size_t line() const { return line_; }
    std::size_t column() const { return column_; }

private:
    std::size_t line_;
    std::size_t column_;
};

std::vector<Trial> read_trials(std::istream& in);

}  // namespace eegcopilot::eeg
