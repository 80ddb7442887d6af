#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "eegcopilot/eeg.hpp"
#include "eegcopilot/gridworld.hpp"

namespace eegcopilot::human {

using eeg::Posterior;
using Confusion = std::array<std::array<double, kNumActions>, kNumActions>;

/// One step of decoded human input.
struct HumanDecodedAction {
    Action intended = Action::Left;
    Action a_fc = Action::Left;
    Action a_bp = Action::Left;
    Action a_pp = Action::Left;
    Posterior posterior_fc{};
    Posterior posterior_bp{};
    Posterior posterior_pp{};

    friend bool operator==(const HumanDecodedAction&, const HumanDecodedAction&) = default;
};

/// Heads for the invisible target when one is active, otherwise the visible
/// one. Moves along the axis with the larger remaining distance; ties go
/// horizontal. Returns Left when already on the selected target.
Action intended_action(const EnvState& state);

/// Held-out classifications grouped by true class; draws are uniform with
/// replacement within the requested class.
class TrialPool {
public:
    explicit TrialPool(std::vector<eeg::ClassifiedTrial> trials);

    std::span<const eeg::ClassifiedTrial> trials() const { return trials_; }
    std::span<const std::size_t> members(int cls) const { return by_class_[static_cast<std::size_t>(cls)]; }
    eeg::AccuracySummary accuracy() const { return eeg::summarize(trials_); }

    const eeg::ClassifiedTrial& draw(int cls, Rng& rng) const;

private:
    std::vector<eeg::ClassifiedTrial> trials_;
    std::array<std::vector<std::size_t>, kNumActions> by_class_;
};

HumanDecodedAction decode_from_pool(const TrialPool& pool, Action intended, Rng& rng);

struct SurrogateSpec {
    Confusion confusion_fc{};
    Confusion confusion_bp{};
    /// Probability that the BP label copies the FC label.
    double rho = 0.0;
    /// Posterior peak mass is kappa / (kappa + 3); the rest is uniform.
    double kappa = 6.0;

    void validate() const;

    /// Both channels share a confusion matrix with `diagonal` on the diagonal
    /// and the remainder spread evenly.
    static SurrogateSpec symmetric(double diagonal, double rho, double kappa = 6.0);
};

HumanDecodedAction decode_from_surrogate(const SurrogateSpec& spec, Action intended, Rng& rng);

Posterior peaked_posterior(Action label, double kappa);

/// Exact decoding statistics of a surrogate under uniformly distributed intents.
struct SurrogateStats {
    double agreement = 0.0;  // P(a_fc = a_bp)
    double union_accuracy = 0.0;  // P(a_fc or a_bp correct)
    double fused_accuracy = 0.0;  // P(a_pp correct)
};

SurrogateStats surrogate_stats(const SurrogateSpec& spec);

/// Diagonal of SurrogateSpec::symmetric whose fused accuracy equals `target`.
/// Throws std::invalid_argument when the target is out of reach.
double calibrate_symmetric(double target_fused_accuracy, double rho, double kappa = 6.0);

/// Pool record file:
///   pool trials=<n>
///   then per trial: label_true label_fc label_bp p_fc[0..3] p_bp[0..3]
/// Blank lines and '#' comments are ignored.
void write_pool(std::ostream& out, std::span<const eeg::ClassifiedTrial> trials);
std::vector<eeg::ClassifiedTrial> read_pool(std::istream& in);

}  // namespace eegcopilot::human
