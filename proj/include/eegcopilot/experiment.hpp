#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "eegcopilot/arbitration.hpp"
#include "eegcopilot/config.hpp"
#include "eegcopilot/disparity.hpp"
#include "eegcopilot/eeg.hpp"
#include "eegcopilot/evalkit.hpp"
#include "eegcopilot/gridworld.hpp"
#include "eegcopilot/human_agent.hpp"
#include "eegcopilot/td3.hpp"

namespace eegcopilot::experiment {

enum class HumanSourceKind { Surrogate, Pool };
enum class EnvVariant { Visible, Invisible };

std::string_view to_string(EnvVariant v);

struct SurrogateSettings {
    /// Target fused accuracy; the symmetric confusion diagonal is solved for it.
    double fused_accuracy = 0.55;
    /// Explicit confusion diagonal; overrides fused_accuracy when set.
    std::optional<double> diagonal;
    double rho = 0.3;
    double kappa = 6.0;

    human::SurrogateSpec spec() const;
};

struct ExperimentConfig {
    std::uint64_t seed = 1;
    EnvConfig env;
    rl::Td3Config td3;

    HumanSourceKind human_source = HumanSourceKind::Surrogate;
    SurrogateSettings surrogate;
    std::string pool_path;  // empty: <out-dir>/pool.txt

    // EEG pipeline (gen-synthetic, build-pool)
    std::string trials_path;  // empty: <out-dir>/trials.txt
    eeg::SyntheticConfig synthetic;
    bool shuffle_labels = false;
    double lda_lambda = 0.1;
    int cv_folds = 10;

    // evaluate
    std::vector<copilot::Scheme> schemes = {copilot::Scheme::TD3,   copilot::Scheme::EEG_NB, copilot::Scheme::EEG_FB,
                                            copilot::Scheme::Co_NB, copilot::Scheme::Co_PPB, copilot::Scheme::Co_FB};
    std::vector<EnvVariant> environments = {EnvVariant::Visible, EnvVariant::Invisible};
    int eval_steps = 1000;
    int repetitions = 12;
    eval::Weights weights;
    eval::MergeRule merge = eval::MergeRule::Sum;
    bool decision_logs = true;
    std::string agent_path;    // empty: <out-dir>/agent.td3
    std::string blocker_path;  // empty: <out-dir>/blocker.blk

    // sweep-d
    int d_points = 11;
    std::uint64_t mc_samples = 1'000'000;
    int mc_streams = 8;
    std::vector<double> battery = {0.30, 0.35, 0.40, 0.45, 0.50, 0.55, 0.60, 0.65, 0.70, 0.75, 0.80, 0.85, 0.90, 0.95};
    /// Fixed P_block for every source; when absent it is measured as the
    /// Co_FB block rate with the trained agent and blocker.
    std::optional<double> p_block;
    int p_block_steps = 20000;

    /// Worker threads; 0 picks the hardware concurrency.
    int threads = 0;

    void validate() const;
};

/// Reads every recognised key; unknown keys raise ConfigError.
ExperimentConfig load_experiment_config(const KeyValueConfig& kv);

struct OutputOptions {
    std::filesystem::path out_dir = ".";
    bool timestamp = true;

    std::filesystem::path resolve(const std::string& configured, const char* fallback_name) const;
};

/// Per-step human input source.
class HumanModel {
public:
    explicit HumanModel(human::SurrogateSpec spec);
    explicit HumanModel(human::TrialPool pool);

    human::HumanDecodedAction decode(Action intended, Rng& rng) const;
    /// Closed-form or pool statistics for the disparity model.
    copilot::DisparityModel model(double d, double p_block) const;
    double fused_accuracy() const;

private:
    std::variant<human::SurrogateSpec, human::TrialPool> source_;
};

HumanModel make_human_model(const ExperimentConfig& cfg, const OutputOptions& out);

struct RunLog {
    std::vector<copilot::DecisionRecord> decisions;
    std::vector<StepOutcome> outcomes;
    std::vector<EnvState> states;  // state before each step
};

struct RunResult {
    copilot::Scheme scheme = copilot::Scheme::TD3;
    EnvVariant environment = EnvVariant::Invisible;
    int repetition = 0;
    std::uint64_t seed = 0;
    eval::RunMetrics metrics;
    eval::ScoreReport score;
    RunLog log;
};

struct EvalResources {
    const rl::Td3Agent* agent = nullptr;
    const rl::Blocker* blocker = nullptr;  // may be null when no scheme blocks
    const HumanModel* human = nullptr;     // may be null for TD3 only
};

/// One seeded evaluation run. Environment and human streams depend only on
/// (seed, environment), so all schemes of a repetition share them.
RunResult run_evaluation(const ExperimentConfig& cfg, const EvalResources& res, copilot::Scheme scheme,
                         EnvVariant environment, int repetition, bool keep_log);

/// Every scheme x repetition x environment, ordered by (environment, scheme,
/// repetition) regardless of thread scheduling.
std::vector<RunResult> run_all(const ExperimentConfig& cfg, const EvalResources& res, bool keep_logs);

struct PairwiseTest {
    EnvVariant environment;
    std::string metric;
    copilot::Scheme a;
    copilot::Scheme b;
    eval::WilcoxonResult result;
};

std::vector<std::string> metric_names();
double metric_value(const RunResult& r, const std::string& metric);

/// Wilcoxon over repetitions for every ordered scheme pair and metric; the
/// diagonal is reported with p = 1.
std::vector<PairwiseTest> pairwise_tests(const ExperimentConfig& cfg, const std::vector<RunResult>& runs);

struct SweepRow {
    std::string source;
    copilot::DisparityModel model;
    copilot::Authority closed;
    double acc_c = 0.0;
    copilot::MonteCarloEstimate mc;
};

struct SweepCorrelation {
    double d = 0.0;
    eval::Correlation acc_vs_delta;  // Acc_pp vs Acc_c - Acc_pp
    eval::Correlation acc_vs_ath_r;
};

struct SweepResult {
    std::vector<SweepRow> rows;  // source-major, d ascending
    std::vector<SweepCorrelation> correlations;
    double max_gap = 0.0;
};

/// Battery of symmetric surrogates at cfg.battery accuracies (plus the pool,
/// when the configured source is a pool). p_block per source comes from cfg or
/// from `measure_p_block` when given.
SweepResult sweep_d(const ExperimentConfig& cfg, const OutputOptions& out, const EvalResources* measure_with);

/// Fraction of Co_FB steps on which the blocker fired.
double measure_p_block(const ExperimentConfig& cfg, const EvalResources& res);

// Commands. Each writes its outputs under out.out_dir and returns a short
// human-readable summary.
std::string cmd_gen_synthetic(const ExperimentConfig& cfg, const OutputOptions& out);
std::string cmd_build_pool(const ExperimentConfig& cfg, const OutputOptions& out);
std::string cmd_train(const ExperimentConfig& cfg, const OutputOptions& out);
std::string cmd_evaluate(const ExperimentConfig& cfg, const OutputOptions& out);
std::string cmd_sweep_d(const ExperimentConfig& cfg, const OutputOptions& out);
std::string cmd_export_plotdata(const ExperimentConfig& cfg, const OutputOptions& out);

/// Failure of a command that is not a configuration problem.
class RuntimeFailure : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}  // namespace eegcopilot::experiment
