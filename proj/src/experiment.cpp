#include "eegcopilot/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>
#include <thread>

namespace eegcopilot::experiment {

namespace fs = std::filesystem;
using copilot::Scheme;

std::string_view to_string(EnvVariant v) { return v == EnvVariant::Visible ? "visible" : "invisible"; }

namespace {

std::uint64_t derive_seed(std::initializer_list<std::uint64_t> parts) {
    std::vector<std::uint32_t> words;
    for (auto p : parts) {
        words.push_back(static_cast<std::uint32_t>(p & 0xFFFFFFFFu));
        words.push_back(static_cast<std::uint32_t>(p >> 32));
    }
    std::seed_seq seq(words.begin(), words.end());
    std::array<std::uint32_t, 2> out{};
    seq.generate(out.begin(), out.end());
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

// Stream tags keep derived generators apart.
enum : std::uint64_t { kTagEnv = 1, kTagHuman = 2, kTagSynthetic = 3, kTagShuffle = 4, kTagCv = 5, kTagMc = 6 };

std::string num(double v) {
    if (std::isnan(v)) return "nan";
    std::ostringstream ss;
    ss << std::setprecision(12) << v;
    return ss.str();
}

class CsvWriter {
public:
    CsvWriter(const fs::path& path, bool timestamp) : out_(path) {
        if (!out_) throw RuntimeFailure("cannot write " + path.string());
        if (timestamp) {
            const std::time_t now = std::time(nullptr);
            std::tm tm{};
            gmtime_r(&now, &tm);
            char buf[32];
            std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
            out_ << "# generated_at=" << buf << '\n';
        }
    }

    void comment(const std::string& text) { out_ << "# " << text << '\n'; }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw RuntimeFailure("missing input " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream ss(line);
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        rows.push_back(std::move(cells));
    }
    if (rows.empty()) throw RuntimeFailure(path.string() + " has no header row");
    return rows;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw RuntimeFailure("cannot create " + dir.string() + ": " + ec.message());
}

int worker_count(const ExperimentConfig& cfg, std::size_t tasks) {
    int n = cfg.threads > 0 ? cfg.threads : static_cast<int>(std::thread::hardware_concurrency());
    return std::clamp(n, 1, static_cast<int>(std::max<std::size_t>(tasks, 1)));
}

// Runs fn(i) for i in [0, n) on a small worker pool; results are stored by index.
template <typename Fn>
void parallel_for(std::size_t n, int workers, Fn fn) {
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::exception_ptr error;
    std::mutex error_mutex;
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&] {
            for (std::size_t i = next++; i < n; i = next++) {
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(error_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    }
    for (auto& t : pool) t.join();
    if (error) std::rethrow_exception(error);
}

void require_file(const KeyValueConfig& kv, const std::string& key) {
    if (kv.has(key)) {
        const auto path = kv.get_string(key, "");
        if (!fs::exists(path)) throw ConfigError(key + ": file '" + path + "' does not exist");
    }
}

}  // namespace

human::SurrogateSpec SurrogateSettings::spec() const {
    const double diag = diagonal ? *diagonal : human::calibrate_symmetric(fused_accuracy, rho, kappa);
    return human::SurrogateSpec::symmetric(diag, rho, kappa);
}

void ExperimentConfig::validate() const {
    try {
        env.validate();
        td3.validate();
        synthetic.validate();
        if (surrogate.diagonal) {
            human::SurrogateSpec::symmetric(*surrogate.diagonal, surrogate.rho, surrogate.kappa).validate();
        } else {
            surrogate.spec().validate();
        }
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception& e) {
        throw ConfigError(e.what());
    }
    if (schemes.empty()) throw ConfigError("eval.schemes is empty");
    if (environments.empty()) throw ConfigError("eval.environments is empty");
    if (eval_steps < 1) throw ConfigError("eval.steps must be >= 1");
    if (repetitions < 1) throw ConfigError("eval.repetitions must be >= 1");
    if (lda_lambda < 0.0 || lda_lambda > 1.0) throw ConfigError("eeg.lambda must lie in [0, 1]");
    if (cv_folds < 2) throw ConfigError("eeg.folds must be >= 2");
    if (d_points < 2) throw ConfigError("sweep.d_points must be >= 2");
    if (mc_samples < 10'000) throw ConfigError("sweep.mc_samples must be >= 10000");
    if (mc_streams < 1) throw ConfigError("sweep.mc_streams must be >= 1");
    if (battery.size() < 3) throw ConfigError("sweep.battery needs at least 3 accuracies");
    for (double a : battery) {
        if (!(a > 0.0 && a < 1.0)) throw ConfigError("sweep.battery accuracies must lie in (0, 1)");
    }
    if (p_block && !(*p_block >= 0.0 && *p_block <= 1.0)) throw ConfigError("sweep.p_block must lie in [0, 1]");
    if (p_block_steps < 1) throw ConfigError("sweep.p_block_steps must be >= 1");
    if (threads < 0) throw ConfigError("threads must be >= 0");
}

ExperimentConfig load_experiment_config(const KeyValueConfig& kv) {
    ExperimentConfig c;
    c.seed = static_cast<std::uint64_t>(kv.get_int("seed", static_cast<std::int64_t>(c.seed)));
    c.threads = static_cast<int>(kv.get_int("threads", c.threads));

    c.env.grid_size = static_cast<int>(kv.get_int("env.grid_size", c.env.grid_size));
    c.env.invisible_spawn_prob = kv.get_double("env.invisible_spawn_prob", c.env.invisible_spawn_prob);
    c.env.shaping_reward = kv.get_double("env.shaping_reward", c.env.shaping_reward);
    c.env.fail_penalty = kv.get_double("env.fail_penalty", c.env.fail_penalty);
    c.env.target_reward = kv.get_double("env.target_reward", c.env.target_reward);

    auto& t = c.td3;
    t.gamma = kv.get_double("td3.gamma", t.gamma);
    t.tau = kv.get_double("td3.tau", t.tau);
    t.policy_delay = static_cast<int>(kv.get_int("td3.policy_delay", t.policy_delay));
    t.batch_size = static_cast<int>(kv.get_int("td3.batch_size", t.batch_size));
    t.buffer_capacity = static_cast<std::size_t>(kv.get_int("td3.buffer_capacity", static_cast<std::int64_t>(t.buffer_capacity)));
    t.train_steps = kv.get_int("td3.train_steps", t.train_steps);
    t.warmup_steps = kv.get_int("td3.warmup_steps", t.warmup_steps);
    t.updates_per_step = static_cast<int>(kv.get_int("td3.updates_per_step", t.updates_per_step));
    t.learning_rate = kv.get_double("td3.learning_rate", t.learning_rate);
    t.epsilon_start = kv.get_double("td3.epsilon_start", t.epsilon_start);
    t.epsilon_end = kv.get_double("td3.epsilon_end", t.epsilon_end);
    t.epsilon_anneal_fraction = kv.get_double("td3.epsilon_anneal_fraction", t.epsilon_anneal_fraction);
    t.max_episode_steps = static_cast<int>(kv.get_int("td3.max_episode_steps", t.max_episode_steps));
    t.blocker_threshold = kv.get_double("td3.blocker_threshold", t.blocker_threshold);
    t.blocker_fail_fraction = kv.get_double("td3.blocker_fail_fraction", t.blocker_fail_fraction);
    t.log_interval = kv.get_int("td3.log_interval", t.log_interval);
    {
        std::vector<double> def(t.hidden_sizes.begin(), t.hidden_sizes.end());
        const auto hs = kv.get_doubles("td3.hidden_sizes", def);
        t.hidden_sizes.clear();
        for (double h : hs) {
            if (h < 1 || h != std::floor(h)) throw ConfigError("td3.hidden_sizes must be positive integers");
            t.hidden_sizes.push_back(static_cast<int>(h));
        }
    }
    t.state_scale = kv.get_double("td3.state_scale", t.state_scale);
    t.state_offset = kv.get_double("td3.state_offset", t.state_offset);
    t.eval_interval = kv.get_int("td3.eval_interval", t.eval_interval);
    t.eval_episodes = static_cast<int>(kv.get_int("td3.eval_episodes", t.eval_episodes));
    t.blocker_refine_steps = kv.get_int("td3.blocker_refine_steps", t.blocker_refine_steps);
    t.logit_l2 = kv.get_double("td3.logit_l2", t.logit_l2);

    const auto source = kv.get_string("human.source", "surrogate");
    if (source == "surrogate") {
        c.human_source = HumanSourceKind::Surrogate;
    } else if (source == "pool") {
        c.human_source = HumanSourceKind::Pool;
    } else {
        throw ConfigError("human.source must be 'surrogate' or 'pool', got '" + source + "'");
    }
    require_file(kv, "human.pool");
    c.pool_path = kv.get_string("human.pool", "");
    c.surrogate.fused_accuracy = kv.get_double("human.fused_accuracy", c.surrogate.fused_accuracy);
    if (kv.has("human.diagonal")) c.surrogate.diagonal = kv.get_double("human.diagonal", 0.0);
    c.surrogate.rho = kv.get_double("human.rho", c.surrogate.rho);
    c.surrogate.kappa = kv.get_double("human.kappa", c.surrogate.kappa);

    require_file(kv, "eeg.trials");
    c.trials_path = kv.get_string("eeg.trials", "");
    auto& s = c.synthetic;
    s.channels = static_cast<int>(kv.get_int("eeg.channels", s.channels));
    s.fs = kv.get_double("eeg.fs", s.fs);
    s.samples = static_cast<int>(kv.get_int("eeg.samples", s.samples));
    s.trials_per_class = static_cast<int>(kv.get_int("eeg.trials_per_class", s.trials_per_class));
    s.noise_level = kv.get_double("eeg.noise_level", s.noise_level);
    s.oscillation_amplitude = kv.get_double("eeg.oscillation_amplitude", s.oscillation_amplitude);
    {
        const auto hz = kv.get_doubles("eeg.oscillation_hz", {s.oscillation_hz.begin(), s.oscillation_hz.end()});
        if (hz.size() != s.oscillation_hz.size()) throw ConfigError("eeg.oscillation_hz needs 4 frequencies");
        std::copy(hz.begin(), hz.end(), s.oscillation_hz.begin());
    }
    s.coupling_weight = kv.get_double("eeg.coupling_weight", s.coupling_weight);
    s.baseline_amplitude = kv.get_double("eeg.baseline_amplitude", s.baseline_amplitude);
    c.shuffle_labels = kv.get_bool("eeg.shuffle_labels", c.shuffle_labels);
    c.lda_lambda = kv.get_double("eeg.lambda", c.lda_lambda);
    c.cv_folds = static_cast<int>(kv.get_int("eeg.folds", c.cv_folds));

    if (kv.has("eval.schemes")) {
        c.schemes.clear();
        for (const auto& name : kv.get_strings("eval.schemes", {})) {
            const auto sc = copilot::parse_scheme(name);
            if (!sc) throw ConfigError("eval.schemes: unknown scheme '" + name + "'");
            c.schemes.push_back(*sc);
        }
    }
    if (kv.has("eval.environments")) {
        c.environments.clear();
        for (const auto& name : kv.get_strings("eval.environments", {})) {
            if (name == "visible") {
                c.environments.push_back(EnvVariant::Visible);
            } else if (name == "invisible") {
                c.environments.push_back(EnvVariant::Invisible);
            } else {
                throw ConfigError("eval.environments: expected 'visible' or 'invisible', got '" + name + "'");
            }
        }
    }
    c.eval_steps = static_cast<int>(kv.get_int("eval.steps", c.eval_steps));
    c.repetitions = static_cast<int>(kv.get_int("eval.repetitions", c.repetitions));
    {
        const auto w = kv.get_doubles("eval.weights", {c.weights.visible, c.weights.invisible, c.weights.fail, c.weights.block});
        if (w.size() != 4) throw ConfigError("eval.weights needs 4 numbers");
        c.weights = {w[0], w[1], w[2], w[3]};
    }
    const auto merge = kv.get_string("eval.merge", "sum");
    if (merge == "sum") {
        c.merge = eval::MergeRule::Sum;
    } else if (merge == "mean") {
        c.merge = eval::MergeRule::Mean;
    } else {
        throw ConfigError("eval.merge must be 'sum' or 'mean'");
    }
    c.decision_logs = kv.get_bool("eval.decision_logs", c.decision_logs);
    require_file(kv, "eval.agent");
    require_file(kv, "eval.blocker");
    c.agent_path = kv.get_string("eval.agent", "");
    c.blocker_path = kv.get_string("eval.blocker", "");

    c.d_points = static_cast<int>(kv.get_int("sweep.d_points", c.d_points));
    c.mc_samples = static_cast<std::uint64_t>(kv.get_int("sweep.mc_samples", static_cast<std::int64_t>(c.mc_samples)));
    c.mc_streams = static_cast<int>(kv.get_int("sweep.mc_streams", c.mc_streams));
    c.battery = kv.get_doubles("sweep.battery", c.battery);
    if (kv.has("sweep.p_block")) c.p_block = kv.get_double("sweep.p_block", 0.0);
    c.p_block_steps = static_cast<int>(kv.get_int("sweep.p_block_steps", c.p_block_steps));

    kv.reject_unread();
    c.validate();
    return c;
}

fs::path OutputOptions::resolve(const std::string& configured, const char* fallback_name) const {
    return configured.empty() ? out_dir / fallback_name : fs::path(configured);
}

HumanModel::HumanModel(human::SurrogateSpec spec) : source_(std::move(spec)) {}
HumanModel::HumanModel(human::TrialPool pool) : source_(std::move(pool)) {}

human::HumanDecodedAction HumanModel::decode(Action intended, Rng& rng) const {
    if (const auto* spec = std::get_if<human::SurrogateSpec>(&source_)) {
        return human::decode_from_surrogate(*spec, intended, rng);
    }
    return human::decode_from_pool(std::get<human::TrialPool>(source_), intended, rng);
}

copilot::DisparityModel HumanModel::model(double d, double p_block) const {
    if (const auto* spec = std::get_if<human::SurrogateSpec>(&source_)) {
        return copilot::estimate_model_from_data(*spec, d, p_block);
    }
    return copilot::estimate_model_from_data(std::get<human::TrialPool>(source_).trials(), d, p_block);
}

double HumanModel::fused_accuracy() const { return model(0.0, 0.0).acc_pp; }

HumanModel make_human_model(const ExperimentConfig& cfg, const OutputOptions& out) {
    if (cfg.human_source == HumanSourceKind::Surrogate) return HumanModel(cfg.surrogate.spec());
    const fs::path path = out.resolve(cfg.pool_path, "pool.txt");
    std::ifstream in(path);
    if (!in) throw RuntimeFailure("missing pool file " + path.string() + " (run build-pool first)");
    try {
        return HumanModel(human::TrialPool(human::read_pool(in)));
    } catch (const eeg::ParseError& e) {
        throw RuntimeFailure(path.string() + ": " + e.what());
    }
}

namespace {

RunResult simulate(const ExperimentConfig& cfg, const EvalResources& res, Scheme scheme, EnvVariant environment,
                   int repetition, int steps, bool keep_log) {
    if (!res.agent) throw RuntimeFailure("evaluation needs a trained agent");
    if (copilot::uses_blocker(scheme) && !res.blocker) throw RuntimeFailure("scheme needs a trained blocker");
    if (copilot::uses_human(scheme) && !res.human) throw RuntimeFailure("scheme needs a human source");

    RunResult out;
    out.scheme = scheme;
    out.environment = environment;
    out.repetition = repetition;
    out.seed = cfg.seed + static_cast<std::uint64_t>(repetition);

    EnvConfig env = cfg.env;
    if (environment == EnvVariant::Visible) env.invisible_spawn_prob = 0.0;
    const auto variant = static_cast<std::uint64_t>(environment);
    Rng env_rng(derive_seed({out.seed, variant, kTagEnv}));
    Rng human_rng(derive_seed({out.seed, variant, kTagHuman}));

    RunLog log;
    log.decisions.reserve(static_cast<std::size_t>(steps));
    log.outcomes.reserve(static_cast<std::size_t>(steps));

    EnvState state = reset(env, env_rng);
    for (int i = 0; i < steps; ++i) {
        const Observation obs = observe_rl(state, env);
        const Action a_r = res.agent->greedy(obs);
        std::optional<human::HumanDecodedAction> h;
        if (copilot::uses_human(scheme)) h = res.human->decode(human::intended_action(state), human_rng);
        copilot::BlockFn block;
        if (res.blocker) block = [&](Action a) { return rl::assess_risk(*res.blocker, obs, a); };
        auto rec = copilot::decide(scheme, h ? &*h : nullptr, a_r, res.blocker ? &block : nullptr, state);

        auto [next, outcome] = rec.a_final ? step(state, *rec.a_final, env, env_rng) : idle(state, env, env_rng);
        if (outcome.failed) next = respawn_after_fail(next, env, env_rng);
        if (keep_log) log.states.push_back(state);
        log.decisions.push_back(std::move(rec));
        log.outcomes.push_back(outcome);
        state = next;
    }
    out.metrics = eval::collect_metrics(log.decisions, log.outcomes);
    out.score = eval::adjusted_scores(eval::aggregated_score(out.metrics, cfg.weights), out.metrics, cfg.merge);
    if (keep_log) out.log = std::move(log);
    return out;
}

}  // namespace

RunResult run_evaluation(const ExperimentConfig& cfg, const EvalResources& res, Scheme scheme,
                         EnvVariant environment, int repetition, bool keep_log) {
    return simulate(cfg, res, scheme, environment, repetition, cfg.eval_steps, keep_log);
}

std::vector<RunResult> run_all(const ExperimentConfig& cfg, const EvalResources& res, bool keep_logs) {
    struct Task {
        EnvVariant env;
        Scheme scheme;
        int rep;
    };
    std::vector<Task> tasks;
    for (EnvVariant e : cfg.environments) {
        for (Scheme s : cfg.schemes) {
            for (int r = 0; r < cfg.repetitions; ++r) tasks.push_back({e, s, r});
        }
    }
    std::vector<RunResult> results(tasks.size());
    parallel_for(tasks.size(), worker_count(cfg, tasks.size()), [&](std::size_t i) {
        results[i] = run_evaluation(cfg, res, tasks[i].scheme, tasks[i].env, tasks[i].rep, keep_logs);
    });
    return results;
}

std::vector<std::string> metric_names() {
    return {"visible", "invisible", "total_fail", "total_block", "pct_human_action", "human_workload",
            "aggregated", "score_human_action", "score_human_workload", "final"};
}

double metric_value(const RunResult& r, const std::string& metric) {
    const auto& m = r.metrics;
    if (metric == "visible") return static_cast<double>(m.visible);
    if (metric == "invisible") return static_cast<double>(m.invisible);
    if (metric == "total_fail") return static_cast<double>(m.fails);
    if (metric == "total_block") return static_cast<double>(m.blocks);
    if (metric == "pct_human_action") return m.pct_human_action;
    if (metric == "human_workload") return m.human_workload;
    if (metric == "aggregated") return r.score.aggregated;
    if (metric == "score_human_action") return r.score.score_human_action;
    if (metric == "score_human_workload") return r.score.score_human_workload;
    if (metric == "final") return r.score.final_score;
    throw std::invalid_argument("unknown metric " + metric);
}

namespace {

std::vector<double> series(const std::vector<RunResult>& runs, EnvVariant env, Scheme scheme, const std::string& metric) {
    std::vector<std::pair<int, double>> v;
    for (const auto& r : runs) {
        if (r.environment == env && r.scheme == scheme) v.emplace_back(r.repetition, metric_value(r, metric));
    }
    std::sort(v.begin(), v.end());
    std::vector<double> out;
    for (const auto& [rep, value] : v) out.push_back(value);
    return out;
}

}  // namespace

std::vector<PairwiseTest> pairwise_tests(const ExperimentConfig& cfg, const std::vector<RunResult>& runs) {
    std::vector<PairwiseTest> out;
    for (EnvVariant env : cfg.environments) {
        for (const auto& metric : metric_names()) {
            for (Scheme a : cfg.schemes) {
                const auto xa = series(runs, env, a, metric);
                for (Scheme b : cfg.schemes) {
                    PairwiseTest t{env, metric, a, b, {}};
                    if (a != b) t.result = eval::wilcoxon_signed_rank(xa, series(runs, env, b, metric));
                    out.push_back(t);
                }
            }
        }
    }
    return out;
}

double measure_p_block(const ExperimentConfig& cfg, const EvalResources& res) {
    const auto run = simulate(cfg, res, Scheme::Co_FB, EnvVariant::Invisible, 0, cfg.p_block_steps, false);
    return static_cast<double>(run.metrics.blocks) / static_cast<double>(cfg.p_block_steps);
}

SweepResult sweep_d(const ExperimentConfig& cfg, const OutputOptions& out, const EvalResources* measure_with) {
    if (!cfg.p_block && (!measure_with || !measure_with->agent || !measure_with->blocker)) {
        throw RuntimeFailure("sweep-d needs sweep.p_block or a trained agent and blocker to measure it");
    }
    struct Source {
        std::string name;
        HumanModel model;
    };
    std::vector<Source> sources;
    for (double acc : cfg.battery) {
        SurrogateSettings s = cfg.surrogate;
        s.diagonal.reset();
        s.fused_accuracy = acc;
        sources.push_back({"surrogate_" + num(acc), HumanModel(s.spec())});
    }
    if (cfg.human_source == HumanSourceKind::Pool) sources.push_back({"pool", make_human_model(cfg, out)});

    std::vector<double> p_block(sources.size());
    parallel_for(sources.size(), worker_count(cfg, sources.size()), [&](std::size_t i) {
        if (cfg.p_block) {
            p_block[i] = *cfg.p_block;
        } else {
            EvalResources res = *measure_with;
            res.human = &sources[i].model;
            p_block[i] = measure_p_block(cfg, res);
        }
    });

    SweepResult result;
    const auto n_d = static_cast<std::size_t>(cfg.d_points);
    result.rows.resize(sources.size() * n_d);
    parallel_for(result.rows.size(), worker_count(cfg, result.rows.size()), [&](std::size_t i) {
        const std::size_t si = i / n_d, di = i % n_d;
        const double d = static_cast<double>(di) / static_cast<double>(n_d - 1);
        SweepRow& row = result.rows[i];
        row.source = sources[si].name;
        row.model = sources[si].model.model(d, p_block[si]);
        row.closed = copilot::authority(row.model);
        row.acc_c = copilot::copilot_accuracy(row.model);
        row.mc = copilot::monte_carlo_authority(row.model, cfg.mc_samples, derive_seed({cfg.seed, kTagMc, si, di}),
                                                cfg.mc_streams, 1);
    });
    for (const auto& row : result.rows) {
        result.max_gap = std::max({result.max_gap, std::abs(row.mc.ath_e - row.closed.human),
                                   std::abs(row.mc.ath_r - row.closed.rl), std::abs(row.mc.acc_c - row.acc_c)});
    }

    for (std::size_t di = 0; di < n_d; ++di) {
        std::vector<double> acc, delta, ath_r;
        for (std::size_t si = 0; si < sources.size(); ++si) {
            const auto& row = result.rows[si * n_d + di];
            acc.push_back(row.model.acc_pp);
            delta.push_back(row.acc_c - row.model.acc_pp);
            ath_r.push_back(row.closed.rl);
        }
        SweepCorrelation c;
        c.d = static_cast<double>(di) / static_cast<double>(n_d - 1);
        const double nan = std::numeric_limits<double>::quiet_NaN();
        try {
            c.acc_vs_delta = eval::pearson_r(acc, delta);
        } catch (const eval::StatsError&) {
            c.acc_vs_delta = {nan, nan, static_cast<int>(acc.size())};
        }
        try {
            c.acc_vs_ath_r = eval::pearson_r(acc, ath_r);
        } catch (const eval::StatsError&) {
            c.acc_vs_ath_r = {nan, nan, static_cast<int>(acc.size())};
        }
        result.correlations.push_back(c);
    }
    return result;
}

namespace {

struct Checkpoints {
    std::optional<rl::Td3Agent> agent;
    std::optional<rl::Blocker> blocker;
};

Checkpoints load_checkpoints(const ExperimentConfig& cfg, const OutputOptions& out, bool need_agent, bool need_blocker) {
    Checkpoints c;
    const fs::path agent_path = out.resolve(cfg.agent_path, "agent.td3");
    const fs::path blocker_path = out.resolve(cfg.blocker_path, "blocker.blk");
    try {
        if (std::ifstream in{agent_path, std::ios::binary}) {
            c.agent = rl::load_agent(in);
        } else if (need_agent) {
            throw RuntimeFailure("missing checkpoint " + agent_path.string() + " (run train first)");
        }
        if (std::ifstream in{blocker_path, std::ios::binary}) {
            c.blocker = rl::load_blocker(in);
        } else if (need_blocker) {
            throw RuntimeFailure("missing checkpoint " + blocker_path.string() + " (run train first)");
        }
    } catch (const RuntimeFailure&) {
        throw;
    } catch (const std::exception& e) {
        throw RuntimeFailure(std::string("corrupt checkpoint: ") + e.what());
    }
    return c;
}

std::vector<eeg::Trial> load_or_generate_trials(const ExperimentConfig& cfg, const OutputOptions& out,
                                                std::string& origin) {
    const fs::path path = out.resolve(cfg.trials_path, "trials.txt");
    if (!cfg.trials_path.empty() || fs::exists(path)) {
        std::ifstream in(path);
        if (!in) throw RuntimeFailure("cannot read " + path.string());
        origin = path.string();
        try {
            return eeg::read_trials(in);
        } catch (const eeg::ParseError& e) {
            throw RuntimeFailure(path.string() + ": " + e.what());
        }
    }
    origin = "synthetic (in memory)";
    Rng rng(derive_seed({cfg.seed, kTagSynthetic}));
    return eeg::gen_synthetic_eeg(cfg.synthetic, rng);
}

}  // namespace

std::string cmd_gen_synthetic(const ExperimentConfig& cfg, const OutputOptions& out) {
    ensure_dir(out.out_dir);
    Rng rng(derive_seed({cfg.seed, kTagSynthetic}));
    const auto trials = eeg::gen_synthetic_eeg(cfg.synthetic, rng);
    const fs::path path = out.out_dir / "trials.txt";
    std::ofstream f(path);
    if (!f) throw RuntimeFailure("cannot write " + path.string());
    eeg::write_trials(f, trials);
    std::ostringstream ss;
    ss << "wrote " << trials.size() << " trials (" << cfg.synthetic.channels << " channels, " << cfg.synthetic.samples
       << " samples) to " << path.string() << '\n';
    return ss.str();
}

std::string cmd_build_pool(const ExperimentConfig& cfg, const OutputOptions& out) {
    ensure_dir(out.out_dir);
    std::string origin;
    auto trials = load_or_generate_trials(cfg, out, origin);
    if (cfg.shuffle_labels) {
        std::vector<int> labels;
        for (const auto& t : trials) labels.push_back(t.label);
        Rng rng(derive_seed({cfg.seed, kTagShuffle}));
        std::shuffle(labels.begin(), labels.end(), rng);
        for (std::size_t i = 0; i < trials.size(); ++i) trials[i].label = labels[i];
    }
    std::vector<eeg::ClassifiedTrial> classified;
    try {
        classified = eeg::crossval_classify(trials, cfg.lda_lambda, cfg.cv_folds, derive_seed({cfg.seed, kTagCv}));
    } catch (const eeg::EegError& e) {
        throw RuntimeFailure(e.what());
    }
    const auto acc = eeg::summarize(classified);

    const fs::path pool_path = out.out_dir / "pool.txt";
    std::ofstream f(pool_path);
    if (!f) throw RuntimeFailure("cannot write " + pool_path.string());
    human::write_pool(f, classified);

    CsvWriter csv(out.out_dir / "pool_accuracy.csv", out.timestamp);
    csv.row({"trials", "fc", "bp", "fused", "shuffled_labels"});
    csv.row({std::to_string(acc.trials), num(acc.fc), num(acc.bp), num(acc.fused), cfg.shuffle_labels ? "1" : "0"});

    std::ostringstream ss;
    ss << std::fixed << std::setprecision(4) << "trials: " << origin << " (" << acc.trials << ")\n"
       << "FC accuracy:    " << acc.fc << "\nBP accuracy:    " << acc.bp << "\nfused accuracy: " << acc.fused
       << "\npool written to " << pool_path.string() << '\n';
    return ss.str();
}

std::string cmd_train(const ExperimentConfig& cfg, const OutputOptions& out) {
    ensure_dir(out.out_dir);
    Rng rng(cfg.seed);
    rl::TrainResult trained;
    try {
        trained = rl::train_td3(cfg.env, cfg.td3, rng);
    } catch (const rl::TrainingDiverged& e) {
        throw RuntimeFailure(e.what());
    }
    const fs::path agent_path = out.out_dir / "agent.td3";
    const fs::path blocker_path = out.out_dir / "blocker.blk";
    {
        std::ofstream f(agent_path, std::ios::binary);
        if (!f) throw RuntimeFailure("cannot write " + agent_path.string());
        rl::save_agent(f, trained.agent);
    }
    {
        std::ofstream f(blocker_path, std::ios::binary);
        if (!f) throw RuntimeFailure("cannot write " + blocker_path.string());
        rl::save_blocker(f, trained.blocker);
    }
    CsvWriter csv(out.out_dir / "training_curve.csv", out.timestamp);
    csv.row({"step", "episodes", "epsilon", "critic_loss", "actor_loss", "blocker_loss", "fails", "targets_reached",
             "eval_score"});
    for (const auto& e : trained.log) {
        csv.row({std::to_string(e.step), std::to_string(e.episodes), num(e.epsilon), num(e.critic_loss),
                 num(e.actor_loss), num(e.blocker_loss), std::to_string(e.fails), std::to_string(e.targets_reached),
                 e.eval_score ? std::to_string(*e.eval_score) : std::string()});
    }
    const auto ev = rl::evaluate_greedy(trained.agent, cfg.env, 1000, derive_seed({cfg.seed, kTagEnv}));
    std::ostringstream ss;
    ss << "trained " << cfg.td3.train_steps << " steps; greedy reach within Manhattan+2: " << ev.reached << "/"
       << ev.episodes << ", fails " << ev.fails << "\ncheckpoints: " << agent_path.string() << ", "
       << blocker_path.string() << '\n';
    return ss.str();
}

std::string cmd_evaluate(const ExperimentConfig& cfg, const OutputOptions& out) {
    ensure_dir(out.out_dir);
    const bool need_blocker = std::any_of(cfg.schemes.begin(), cfg.schemes.end(), copilot::uses_blocker);
    const bool need_human = std::any_of(cfg.schemes.begin(), cfg.schemes.end(), copilot::uses_human);
    const auto ck = load_checkpoints(cfg, out, true, need_blocker);
    std::optional<HumanModel> human;
    if (need_human) human = make_human_model(cfg, out);
    const EvalResources res{&*ck.agent, ck.blocker ? &*ck.blocker : nullptr, human ? &*human : nullptr};

    const auto runs = run_all(cfg, res, cfg.decision_logs);
    // The merge of the two adjusted scores into "final" is a reconstruction.
    const std::string merge_note =
        std::string("merge_rule=") + (cfg.merge == eval::MergeRule::Sum ? "sum" : "mean") + " (reconstructed)";

    {
        CsvWriter csv(out.out_dir / "metrics.csv", out.timestamp);
        csv.comment(merge_note);
        std::vector<std::string> header = {"environment", "scheme", "repetition", "seed", "human_steps", "rl_steps"};
        for (const auto& m : metric_names()) header.push_back(m);
        csv.row(header);
        for (const auto& r : runs) {
            std::vector<std::string> row = {std::string(to_string(r.environment)), std::string(copilot::to_string(r.scheme)),
                                            std::to_string(r.repetition), std::to_string(r.seed),
                                            std::to_string(r.metrics.human_steps), std::to_string(r.metrics.rl_steps)};
            for (const auto& m : metric_names()) row.push_back(num(metric_value(r, m)));
            csv.row(row);
        }
    }
    std::ostringstream summary;
    {
        CsvWriter csv(out.out_dir / "summary.csv", out.timestamp);
        csv.comment(merge_note);
        csv.row({"environment", "scheme", "metric", "mean", "sd", "n"});
        summary << std::fixed << std::setprecision(2);
        for (EnvVariant env : cfg.environments) {
            summary << "[" << to_string(env) << "]\n"
                    << std::left << std::setw(10) << "scheme" << std::right << std::setw(9) << "visible"
                    << std::setw(10) << "invisible" << std::setw(7) << "fail" << std::setw(8) << "block"
                    << std::setw(8) << "%HA" << std::setw(8) << "HW" << std::setw(10) << "final" << '\n';
            for (Scheme s : cfg.schemes) {
                summary << std::left << std::setw(10) << copilot::to_string(s) << std::right;
                for (const auto& m : metric_names()) {
                    const auto v = series(runs, env, s, m);
                    csv.row({std::string(to_string(env)), std::string(copilot::to_string(s)), m, num(eval::mean(v)),
                             num(eval::sample_sd(v)), std::to_string(v.size())});
                    const int width = m == "visible" ? 9 : m == "invisible" ? 10 : m == "total_fail" ? 7 : 8;
                    if (m == "final") {
                        summary << std::setw(10) << eval::mean(v);
                    } else if (m != "aggregated" && m != "score_human_action" && m != "score_human_workload") {
                        summary << std::setw(width) << eval::mean(v);
                    }
                }
                summary << '\n';
            }
        }
    }
    {
        CsvWriter csv(out.out_dir / "wilcoxon.csv", out.timestamp);
        csv.row({"environment", "metric", "scheme_a", "scheme_b", "n", "w_plus", "w_minus", "p_two_sided", "exact"});
        for (const auto& t : pairwise_tests(cfg, runs)) {
            csv.row({std::string(to_string(t.environment)), t.metric, std::string(copilot::to_string(t.a)),
                     std::string(copilot::to_string(t.b)), std::to_string(t.result.n), num(t.result.w_plus),
                     num(t.result.w_minus), num(t.result.p_two_sided), t.result.exact ? "1" : "0"});
        }
    }
    if (cfg.decision_logs) {
        const fs::path dir = out.out_dir / "decisions";
        ensure_dir(dir);
        for (const auto& r : runs) {
            std::ostringstream name;
            name << to_string(r.environment) << '_' << copilot::to_string(r.scheme) << "_rep" << std::setw(2)
                 << std::setfill('0') << r.repetition << ".log";
            std::ofstream f(dir / name.str());
            if (!f) throw RuntimeFailure("cannot write decision log " + name.str());
            f << "step scheme branch a_fc a_bp a_pp a_r a_final blocked agent player target invisible events\n";
            for (std::size_t i = 0; i < r.log.decisions.size(); ++i) {
                const auto& d = r.log.decisions[i];
                const auto& o = r.log.outcomes[i];
                const auto& st = r.log.states[i];
                auto act = [](const std::optional<Action>& a) { return a ? std::string(to_string(*a)) : std::string("-"); };
                f << i << ' ' << copilot::to_string(d.scheme) << ' ' << copilot::to_string(d.branch) << ' '
                  << act(d.human ? std::optional(d.human->a_fc) : std::nullopt) << ' '
                  << act(d.human ? std::optional(d.human->a_bp) : std::nullopt) << ' '
                  << act(d.human ? std::optional(d.human->a_pp) : std::nullopt) << ' ' << to_string(d.a_r) << ' '
                  << (d.a_final ? std::string(to_string(*d.a_final)) : std::string("Halt")) << ' ' << d.blocked << ' '
                  << copilot::to_string(d.acting_agent) << ' ' << st.player.x << ',' << st.player.y << ' '
                  << st.target.x << ',' << st.target.y << ' '
                  << (st.invisible_target ? std::to_string(st.invisible_target->x) + "," + std::to_string(st.invisible_target->y)
                                          : std::string("-"))
                  << ' ' << (o.reached_visible ? "V" : "") << (o.reached_invisible ? "I" : "") << (o.failed ? "F" : "")
                  << (!o.reached_visible && !o.reached_invisible && !o.failed ? "-" : "") << '\n';
            }
        }
    }
    return summary.str();
}

std::string cmd_sweep_d(const ExperimentConfig& cfg, const OutputOptions& out) {
    ensure_dir(out.out_dir);
    std::optional<Checkpoints> ck;
    EvalResources res;
    if (!cfg.p_block) {
        ck = load_checkpoints(cfg, out, true, true);
        res.agent = &*ck->agent;
        res.blocker = &*ck->blocker;
    }
    const SweepResult sweep = sweep_d(cfg, out, cfg.p_block ? nullptr : &res);

    {
        CsvWriter csv(out.out_dir / "sweep_d.csv", out.timestamp);
        csv.row({"source", "d", "acc_pp", "acc_e1", "w1e", "p_block", "w1r", "w2", "w3e", "w3r", "w4r", "w5e", "ath_e",
                 "ath_r", "acc_c", "delta_acc", "mc_ath_e", "mc_ath_r", "mc_acc_c", "gap_ath_e", "gap_ath_r",
                 "gap_acc_c"});
        for (const auto& r : sweep.rows) {
            const auto& m = r.model;
            csv.row({r.source, num(m.d), num(m.acc_pp), num(m.acc_e1), num(m.w1e), num(m.p_block), num(m.w1r), num(m.w2),
                     num(m.w3e), num(m.w3r), num(m.w4r), num(m.w5e), num(r.closed.human), num(r.closed.rl), num(r.acc_c),
                     num(r.acc_c - m.acc_pp), num(r.mc.ath_e), num(r.mc.ath_r), num(r.mc.acc_c),
                     num(std::abs(r.mc.ath_e - r.closed.human)), num(std::abs(r.mc.ath_r - r.closed.rl)),
                     num(std::abs(r.mc.acc_c - r.acc_c))});
        }
    }
    std::vector<double> r_delta, r_ath;
    {
        CsvWriter csv(out.out_dir / "sweep_correlations.csv", out.timestamp);
        csv.row({"d", "r_accpp_delta_acc", "p_accpp_delta_acc", "r_accpp_ath_r", "p_accpp_ath_r", "n"});
        for (const auto& c : sweep.correlations) {
            csv.row({num(c.d), num(c.acc_vs_delta.r), num(c.acc_vs_delta.p_two_sided), num(c.acc_vs_ath_r.r),
                     num(c.acc_vs_ath_r.p_two_sided), std::to_string(c.acc_vs_delta.n)});
            if (!std::isnan(c.acc_vs_delta.r)) r_delta.push_back(c.acc_vs_delta.r);
            if (!std::isnan(c.acc_vs_ath_r.r)) r_ath.push_back(c.acc_vs_ath_r.r);
        }
    }
    std::ostringstream ss;
    ss << "max |closed form - Monte Carlo| = " << num(sweep.max_gap) << '\n';
    if (!r_delta.empty()) ss << "median r(Acc_pp, dAcc) over d = " << num(eval::median(r_delta)) << '\n';
    if (!r_ath.empty()) ss << "median r(Acc_pp, Ath_r) over d = " << num(eval::median(r_ath)) << '\n';
    std::ofstream stats(out.out_dir / "sweep_stats.txt");
    stats << "max_gap=" << num(sweep.max_gap) << '\n'
          << "median_r_accpp_delta_acc=" << (r_delta.empty() ? "nan" : num(eval::median(r_delta))) << '\n'
          << "median_r_accpp_ath_r=" << (r_ath.empty() ? "nan" : num(eval::median(r_ath))) << '\n';
    return ss.str();
}

std::string cmd_export_plotdata(const ExperimentConfig& cfg, const OutputOptions& out) {
    (void)cfg;
    const fs::path metrics = out.out_dir / "metrics.csv";
    const fs::path sweep = out.out_dir / "sweep_d.csv";
    if (!fs::exists(metrics) && !fs::exists(sweep)) {
        throw RuntimeFailure("nothing to export: neither " + metrics.string() + " nor " + sweep.string() + " exists");
    }
    const fs::path dir = out.out_dir / "plot";
    ensure_dir(dir);
    std::ostringstream ss;
    if (fs::exists(metrics)) {
        const auto rows = read_csv(metrics);
        const auto& header = rows.front();
        const auto names = metric_names();
        std::map<std::string, std::size_t> col;
        for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
        for (const char* needed : {"environment", "scheme", "repetition"}) {
            if (!col.count(needed)) throw RuntimeFailure("metrics.csv lacks column " + std::string(needed));
        }
        CsvWriter csv(dir / "scheme_metrics_long.csv", out.timestamp);
        csv.row({"environment", "scheme", "metric", "repetition", "value"});
        std::size_t n = 0;
        for (std::size_t r = 1; r < rows.size(); ++r) {
            for (const auto& m : names) {
                if (!col.count(m)) throw RuntimeFailure("metrics.csv lacks column " + m);
                csv.row({rows[r][col["environment"]], rows[r][col["scheme"]], m, rows[r][col["repetition"]],
                         rows[r][col[m]]});
                ++n;
            }
        }
        ss << "wrote " << n << " rows to " << (dir / "scheme_metrics_long.csv").string() << '\n';
    }
    if (fs::exists(sweep)) {
        const auto rows = read_csv(sweep);
        const auto& header = rows.front();
        std::map<std::string, std::size_t> col;
        for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
        const std::vector<std::string> keep = {"source", "d", "acc_pp", "acc_c", "delta_acc", "ath_e",
                                               "ath_r", "mc_ath_e", "mc_ath_r", "mc_acc_c"};
        for (const auto& k : keep) {
            if (!col.count(k)) throw RuntimeFailure("sweep_d.csv lacks column " + k);
        }
        CsvWriter csv(dir / "d_grid.csv", out.timestamp);
        csv.row(keep);
        for (std::size_t r = 1; r < rows.size(); ++r) {
            std::vector<std::string> cells;
            for (const auto& k : keep) cells.push_back(rows[r][col[k]]);
            csv.row(cells);
        }
        ss << "wrote " << rows.size() - 1 << " rows to " << (dir / "d_grid.csv").string() << '\n';
    }
    return ss.str();
}

}  // namespace eegcopilot::experiment
