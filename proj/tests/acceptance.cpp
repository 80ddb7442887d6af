// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fail.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <sstream>

#include "eegcopilot/experiment.hpp"
#include "oracles.hpp"

using namespace eegcopilot;
using namespace eegcopilot::experiment;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void report(int id, const std::string& name, const Outcome& o) {
    std::cout << (o.pass ? "PASS" : "FAIL") << "  criterion " << std::setw(2) << id << "  " << name << ": "
              << o.detail << std::endl;
    if (!o.pass) ++failures;
}

void run_criterion(int id, const std::string& name, const std::function<Outcome()>& fn) {
    try {
        report(id, name, fn());
    } catch (const std::exception& e) {
        report(id, name, {false, std::string("exception: ") + e.what()});
    }
}

std::string fmt(double v, int precision = 4) {
    std::ostringstream ss;
    ss << std::setprecision(precision) << v;
    return ss.str();
}

fs::path scratch_dir(const std::string& name) {
    const fs::path dir = fs::temp_directory_path() / ("eegcopilot_acceptance_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

ExperimentConfig config_from(const std::string& text) {
    std::istringstream in(text);
    return load_experiment_config(KeyValueConfig::parse(in, "acceptance"));
}

// Shared state: the agent trained for criterion 2 is reused by 3, 4, 5, 7, 8.
struct Trained {
    rl::Td3Agent agent;
    rl::Blocker blocker;
};
std::optional<Trained> trained;

Outcome gradient_check() {
    const auto t0 = Clock::now();
    Rng rng(2024);
    struct Arch {
        std::vector<int> sizes;
        nn::Activation out;
    };
    const std::vector<Arch> archs = {{{4, 16, 8, 4}, nn::Activation::Linear},
                                     {{8, 16, 8, 1}, nn::Activation::Linear},
                                     {{8, 16, 8, 1}, nn::Activation::Sigmoid},
                                     {{5, 7, 3}, nn::Activation::Sigmoid}};
    double worst = 0.0;
    int cases = 0;
    for (int c = 0; c < 120; ++c) {
        const auto& arch = archs[static_cast<std::size_t>(c) % archs.size()];
        nn::Mlp net(arch.sizes, nn::Activation::Relu, arch.out, rng);
        const Eigen::VectorXd x = Eigen::VectorXd::Random(arch.sizes.front()) * 2.0;
        const Eigen::VectorXd u = Eigen::VectorXd::Random(arch.sizes.back());
        const auto g = net.backward(x, u);
        std::vector<double> analytic = nn::flatten(g);
        for (int i = 0; i < x.size(); ++i) analytic.push_back(g.input(i, 0));

        auto loss = [&](const nn::Mlp& n, const Eigen::VectorXd& in) { return u.dot(n.forward(in)); };
        std::vector<double> numeric;
        auto params = net.flatten();
        const double h = 1e-6;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double keep = params[i];
            params[i] = keep + h;
            net.assign(params);
            const double up = loss(net, x);
            params[i] = keep - h;
            net.assign(params);
            const double down = loss(net, x);
            params[i] = keep;
            numeric.push_back((up - down) / (2 * h));
        }
        net.assign(params);
        for (int i = 0; i < x.size(); ++i) {
            Eigen::VectorXd xp = x, xm = x;
            xp(i) += h;
            xm(i) -= h;
            numeric.push_back((loss(net, xp) - loss(net, xm)) / (2 * h));
        }
        double diff = 0.0, na = 0.0, nb = 0.0;
        for (std::size_t i = 0; i < analytic.size(); ++i) {
            diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
            na += analytic[i] * analytic[i];
            nb += numeric[i] * numeric[i];
        }
        worst = std::max(worst, std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12}));
        ++cases;
    }
    const double secs = seconds_since(t0);
    return {worst < 1e-4 && cases >= 100 && secs < 10.0,
            std::to_string(cases) + " cases, max relative error " + fmt(worst, 3) + ", " + fmt(secs, 3) + " s"};
}

Outcome td3_competence() {
    const auto cfg = config_from("seed = 1\n");
    const fs::path dir = scratch_dir("train");
    const auto t0 = Clock::now();
    cmd_train(cfg, OutputOptions{dir, false});
    const double secs = seconds_since(t0);
    std::ifstream ia(dir / "agent.td3", std::ios::binary), ib(dir / "blocker.blk", std::ios::binary);
    trained = Trained{rl::load_agent(ia), rl::load_blocker(ib)};

    const auto ev = rl::evaluate_greedy(trained->agent, cfg.env, 1000, 777);
    const EvalResources res{&trained->agent, nullptr, nullptr};
    int run_fails = 0;
    for (EnvVariant env : {EnvVariant::Visible, EnvVariant::Invisible}) {
        run_fails += static_cast<int>(run_evaluation(cfg, res, copilot::Scheme::TD3, env, 0, false).metrics.fails);
    }
    const bool pass = cfg.td3.train_steps <= 100'000 && secs < 300.0 && ev.reached >= 950 && run_fails == 0;
    return {pass, std::to_string(cfg.td3.train_steps) + " steps in " + fmt(secs, 3) + " s; reached " +
                      std::to_string(ev.reached) + "/1000 within Manhattan+2 (" + std::to_string(ev.fails) +
                      " fails); 1000-step TD3 runs: " + std::to_string(run_fails) + " fails"};
}

// Filled by criterion 4; criterion 3 also checks the fail counts of these runs.
std::vector<RunResult> main_runs;

Outcome blocker_soundness() {
    if (!trained) return {false, "no trained blocker (criterion 2 failed to produce one)"};
    EnvConfig env;
    int false_neg = 0, false_pos = 0, crossing = 0, interior = 0;
    double min_cross = 1.0, max_interior = 0.0;
    const int g = env.grid_size;
    for (int px = 0; px < g; ++px) {
        for (int py = 0; py < g; ++py) {
            const bool deep = px >= 2 && px <= g - 3 && py >= 2 && py <= g - 3;
            for (int tx = 0; tx < g; ++tx) {
                for (int ty = 0; ty < g; ++ty) {
                    if (tx == px && ty == py) continue;
                    EnvState s;
                    s.player = {px, py};
                    s.target = {tx, ty};
                    const auto obs = observe_rl(s, env);
                    for (Action a : kAllActions) {
                        const double risk = trained->blocker.risk(obs, a);
                        if (crosses_boundary(s.player, a, env)) {
                            ++crossing;
                            min_cross = std::min(min_cross, risk);
                            false_neg += risk < trained->blocker.threshold;
                        } else if (deep) {
                            ++interior;
                            max_interior = std::max(max_interior, risk);
                            false_pos += risk >= trained->blocker.threshold;
                        }
                    }
                }
            }
        }
    }
    std::int64_t guarded_fails = 0;
    for (const auto& r : main_runs) {
        if (r.scheme == copilot::Scheme::Co_FB || r.scheme == copilot::Scheme::EEG_FB) guarded_fails += r.metrics.fails;
    }
    const bool pass = false_neg == 0 && false_pos == 0 && guarded_fails == 0 && !main_runs.empty();
    return {pass, "crossing pairs " + std::to_string(crossing) + " (missed " + std::to_string(false_neg) +
                      ", min risk " + fmt(min_cross) + "); interior pairs " + std::to_string(interior) +
                      " (flagged " + std::to_string(false_pos) + ", max risk " + fmt(max_interior) +
                      "); Co_FB + EEG_FB fails over " + std::to_string(main_runs.size() / 6) +
                      " runs: " + std::to_string(guarded_fails)};
}

std::vector<double> finals(const std::vector<RunResult>& runs, copilot::Scheme s, EnvVariant env) {
    std::vector<std::pair<int, double>> v;
    for (const auto& r : runs) {
        if (r.scheme == s && r.environment == env) v.emplace_back(r.repetition, r.score.final_score);
    }
    std::sort(v.begin(), v.end());
    std::vector<double> out;
    for (const auto& p : v) out.push_back(p.second);
    return out;
}

Outcome ordering(const std::vector<RunResult>& runs, copilot::Scheme best, const std::vector<copilot::Scheme>& others) {
    const auto top = finals(runs, best, EnvVariant::Invisible);
    bool pass = true;
    std::string detail = std::string(copilot::to_string(best)) + " mean " + fmt(eval::mean(top), 5);
    for (auto s : others) {
        const auto v = finals(runs, s, EnvVariant::Invisible);
        const auto w = eval::wilcoxon_signed_rank(top, v);
        const bool ok = eval::mean(top) > eval::mean(v) && w.w_plus > w.w_minus && w.p_two_sided < 0.05;
        pass = pass && ok;
        detail += "; " + std::string(copilot::to_string(s)) + " " + fmt(eval::mean(v), 5) + " (p=" +
                  fmt(w.p_two_sided, 3) + (ok ? ")" : ", not beaten)");
    }
    return {pass, detail};
}

Outcome scheme_ordering() {
    if (!trained) return {false, "no trained agent"};
    const auto cfg = config_from("seed = 1\n[human]\nfused_accuracy = 0.55\n[eval]\nrepetitions = 12\n");
    const HumanModel human(cfg.surrogate.spec());
    const auto t0 = Clock::now();
    main_runs = run_all(cfg, EvalResources{&trained->agent, &trained->blocker, &human}, false);
    const double secs = seconds_since(t0);
    using copilot::Scheme;
    auto o = ordering(main_runs, Scheme::Co_FB,
                      {Scheme::EEG_NB, Scheme::TD3, Scheme::Co_NB, Scheme::Co_PPB, Scheme::EEG_FB});
    o.pass = o.pass && secs < 120.0;
    o.detail += "; " + fmt(secs, 3) + " s";
    return o;
}

Outcome low_accuracy_ordering() {
    if (!trained) return {false, "no trained agent"};
    const auto cfg = config_from(
        "seed = 1\n[human]\nfused_accuracy = 0.31\n[eval]\nenvironments = invisible\n"
        "schemes = Co_FB_SP, Co_FB, EEG_NB, EEG_NB_SC\n");
    const HumanModel human(cfg.surrogate.spec());
    const auto runs = run_all(cfg, EvalResources{&trained->agent, &trained->blocker, &human}, false);
    using copilot::Scheme;
    return ordering(runs, Scheme::Co_FB_SP, {Scheme::Co_FB, Scheme::EEG_NB, Scheme::EEG_NB_SC});
}

Outcome analytics_equivalence() {
    struct Case {
        double w1e, p_block, acc_e1, acc_e2;
    };
    const std::vector<Case> cases = {
        {0.2, 0.0, 0.45, 0.3}, {0.5, 0.05, 0.7, 0.55}, {0.8, 0.1, 0.95, 0.9}, {0.35, 0.3, 0.6, 0.4}, {0.95, 0.02, 0.99, 0.97}};
    double worst = 0.0;
    std::uint64_t seed = 11;
    for (const auto& c : cases) {
        for (int i = 0; i <= 10; ++i) {
            const double d = i / 10.0;
            const auto m = copilot::DisparityModel::derive(d, c.w1e, c.p_block, c.acc_e1, c.acc_e2);
            const auto mc = copilot::monte_carlo_authority(m, 1'000'000, seed++, 8, 1);
            const auto a = copilot::authority(m);
            worst = std::max({worst, std::abs(mc.ath_e - a.human), std::abs(mc.ath_r - a.rl),
                              std::abs(mc.acc_c - copilot::copilot_accuracy(m))});
        }
    }
    bool collapses = true;
    for (const auto& c : cases) {
        const auto a0 = copilot::authority(copilot::DisparityModel::derive(0.0, c.w1e, 0.0, c.acc_e1, c.acc_e2));
        const auto a1 = copilot::authority(copilot::DisparityModel::derive(1.0, c.w1e, 0.0, c.acc_e1, c.acc_e2));
        collapses = collapses && a0.human == 1.0 && a0.rl == 1.0 && a1.rl == 0.0;
    }
    return {worst <= 0.01 && collapses, std::to_string(cases.size()) + " configurations x 11 d values at n=1e6, max gap " +
                                            fmt(worst, 3) + "; exact collapses " + (collapses ? "hold" : "violated")};
}

std::optional<SweepResult> sweep;

Outcome accuracy_trend() {
    if (!trained) return {false, "no trained agent"};
    const auto cfg = config_from("seed = 1\n[sweep]\nmc_samples = 100000\n");
    const EvalResources res{&trained->agent, &trained->blocker, nullptr};
    sweep = sweep_d(cfg, OutputOptions{scratch_dir("sweep"), false}, &res);
    int violations = 0, checked = 0;
    double worst_margin = 1.0;
    for (const auto& row : sweep->rows) {
        if (row.model.d > 0.5 + 1e-12) continue;
        ++checked;
        const double margin = row.acc_c - row.model.acc_pp;
        worst_margin = std::min(worst_margin, margin);
        violations += margin <= 0.0;
    }
    bool corr_ok = true;
    double worst_r = -1.0, worst_p = 0.0;
    for (const auto& c : sweep->correlations) {
        const bool ok = c.acc_vs_delta.r < 0.0 && c.acc_vs_delta.p_two_sided < 0.05;
        corr_ok = corr_ok && ok;
        if (c.acc_vs_delta.r > worst_r || std::isnan(c.acc_vs_delta.r)) {
            worst_r = c.acc_vs_delta.r;
            worst_p = c.acc_vs_delta.p_two_sided;
        }
    }
    std::vector<double> rs;
    int significant = 0;
    for (const auto& c : sweep->correlations) {
        rs.push_back(c.acc_vs_delta.r);
        significant += c.acc_vs_delta.r < 0.0 && c.acc_vs_delta.p_two_sided < 0.05;
    }
    return {violations == 0 && corr_ok,
            "Acc_c > Acc_pp in " + std::to_string(checked - violations) + "/" + std::to_string(checked) +
                " (source, d<=0.5) cells, smallest margin " + fmt(worst_margin, 3) + "; r(Acc_pp, dAcc) median " +
                fmt(eval::median(rs), 3) + ", negative and significant at " + std::to_string(significant) + "/" +
                std::to_string(rs.size()) + " d values, weakest " + fmt(worst_r, 3) + " (p=" + fmt(worst_p, 3) + ")"};
}

Outcome authority_correlation() {
    if (!sweep) return {false, "sweep unavailable"};
    bool ok = true;
    std::vector<double> rs;
    std::string endpoints;
    double weakest = -1.0, weakest_p = 0.0;
    for (const auto& c : sweep->correlations) {
        const bool interior = c.d > 1e-12 && c.d < 1.0 - 1e-12;
        if (!std::isnan(c.acc_vs_ath_r.r)) rs.push_back(c.acc_vs_ath_r.r);
        if (!interior) {
            endpoints += " d=" + fmt(c.d, 2) + ": r=" + fmt(c.acc_vs_ath_r.r, 3);
            continue;
        }
        ok = ok && c.acc_vs_ath_r.r < 0.0 && c.acc_vs_ath_r.p_two_sided < 0.05;
        if (c.acc_vs_ath_r.r > weakest) {
            weakest = c.acc_vs_ath_r.r;
            weakest_p = c.acc_vs_ath_r.p_two_sided;
        }
    }
    return {ok, "r(Acc_pp, Ath_r) median " + fmt(rs.empty() ? NAN : eval::median(rs), 3) + ", weakest over 0<d<1 " +
                    fmt(weakest, 3) + " (p=" + fmt(weakest_p, 3) + ");" + endpoints};
}

Outcome eeg_sanity() {
    eeg::SyntheticConfig s;
    s.noise_level = 0.0;
    Rng rng(5);
    auto trials = eeg::gen_synthetic_eeg(s, rng);
    const double clean = eeg::summarize(eeg::crossval_classify(trials, 0.1, 10, 1)).fused;

    s.noise_level = 1.0;
    trials = eeg::gen_synthetic_eeg(s, rng);
    std::vector<int> labels;
    for (const auto& t : trials) labels.push_back(t.label);
    std::shuffle(labels.begin(), labels.end(), rng);
    for (std::size_t i = 0; i < trials.size(); ++i) trials[i].label = labels[i];
    const double shuffled = eeg::summarize(eeg::crossval_classify(trials, 0.1, 10, 2)).fused;

    eeg::Trial cosine;
    cosine.fs = 200.0;
    cosine.data.resize(1, 200);
    for (int n = 0; n < 200; ++n) cosine.data(0, n) = std::cos(2 * std::numbers::pi * 10.0 * n / 200.0);
    const auto bp = eeg::band_power(cosine);
    const double alpha = bp(2, 0) / bp.sum();

    const bool pass = clean >= 0.99 && std::abs(shuffled - 0.25) <= 0.05 && alpha >= 0.999;
    return {pass, "noise-free fused " + fmt(clean) + "; shuffled fused " + fmt(shuffled) + "; 10 Hz alpha share " +
                      fmt(alpha, 6)};
}

Outcome statistics_correctness() {
    Rng rng(10);
    std::uniform_int_distribution<int> size(1, 10);
    std::uniform_int_distribution<int> value(-5, 5);
    double worst = 0.0;
    for (int c = 0; c < 100; ++c) {
        const int n = size(rng);
        std::vector<double> a(n), b(n);
        for (int i = 0; i < n; ++i) {
            a[i] = value(rng);
            b[i] = value(rng);
        }
        worst = std::max(worst, std::abs(eval::wilcoxon_signed_rank(a, b).p_two_sided - oracle::wilcoxon_enumerated(a, b)));
    }
    std::normal_distribution<double> z(0.0, 1.0);
    double worst_r = 0.0;
    for (int c = 0; c < 100; ++c) {
        std::vector<double> x(20), y(20);
        for (int i = 0; i < 20; ++i) {
            x[i] = z(rng);
            y[i] = 0.5 * x[i] + z(rng);
        }
        worst_r = std::max(worst_r, std::abs(eval::pearson_r(x, y).r - oracle::pearson_direct(x, y)));
    }
    return {worst < 1e-12 && worst_r < 1e-12,
            "Wilcoxon vs 2^n enumeration max |dp| " + fmt(worst, 3) + " over 100 cases; Pearson max |dr| " + fmt(worst_r, 3)};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Outcome determinism() {
    const std::string text =
        "seed = 3\n[td3]\ntrain_steps = 4000\nwarmup_steps = 1000\neval_interval = 2000\nblocker_refine_steps = 500\n"
        "[eeg]\nchannels = 8\ntrials_per_class = 20\n[eval]\nsteps = 300\nrepetitions = 4\n"
        "[sweep]\nmc_samples = 20000\nbattery = 0.3, 0.5, 0.7, 0.9\np_block_steps = 300\n";
    const auto cfg = config_from(text);
    std::vector<fs::path> dirs = {scratch_dir("det_a"), scratch_dir("det_b")};
    for (const auto& dir : dirs) {
        const OutputOptions out{dir, false};
        cmd_gen_synthetic(cfg, out);
        cmd_build_pool(cfg, out);
        cmd_train(cfg, out);
        cmd_evaluate(cfg, out);
        cmd_sweep_d(cfg, out);
        cmd_export_plotdata(cfg, out);
    }
    int compared = 0, differing = 0;
    for (const auto& entry : fs::recursive_directory_iterator(dirs[0])) {
        if (!entry.is_regular_file()) continue;
        const auto rel = fs::relative(entry.path(), dirs[0]);
        ++compared;
        if (slurp(entry.path()) != slurp(dirs[1] / rel)) ++differing;
    }
    return {compared > 0 && differing == 0,
            std::to_string(compared) + " output files compared, " + std::to_string(differing) + " differ"};
}

}  // namespace

int main() {
    const auto t0 = Clock::now();
    run_criterion(1, "gradient correctness", gradient_check);
    run_criterion(10, "statistics correctness", statistics_correctness);
    run_criterion(9, "EEG pipeline sanity", eeg_sanity);
    run_criterion(6, "analytics equivalence", analytics_equivalence);
    run_criterion(2, "TD3 competence", td3_competence);
    run_criterion(4, "scheme ordering at 55%", scheme_ordering);
    run_criterion(3, "blocker soundness", blocker_soundness);
    run_criterion(5, "low-accuracy ordering at 31%", low_accuracy_ordering);
    run_criterion(7, "accuracy-improvement trend", accuracy_trend);
    run_criterion(8, "authority correlation", authority_correlation);
    run_criterion(11, "determinism", determinism);
    std::cout << (failures == 0 ? "all criteria passed" : std::to_string(failures) + " criteria failed") << " in "
              << fmt(seconds_since(t0), 4) << " s" << std::endl;
    return failures == 0 ? 0 : 1;
}
