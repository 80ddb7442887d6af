#include <CLI11.hpp>

#include <cstdint>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "eegcopilot/experiment.hpp"

namespace {

namespace ex = eegcopilot::experiment;

constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

using Command = std::function<std::string(const ex::ExperimentConfig&, const ex::OutputOptions&)>;

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"EEG-driven copilot for a shared-control grid world"};
    app.require_subcommand(1);
    app.fallthrough();

    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out_dir = "out";
    bool no_timestamp = false;
    app.add_option("--config", config_path, "key = value configuration file");
    app.add_option("--seed", seed, "master seed (overrides the config)");
    app.add_option("--out-dir", out_dir, "directory for all outputs")->capture_default_str();
    app.add_flag("--no-timestamp", no_timestamp, "omit the generated_at line from CSV outputs");

    const std::map<std::string, std::pair<std::string, Command>> commands = {
        {"gen-synthetic", {"generate synthetic 4-class EEG trials", ex::cmd_gen_synthetic}},
        {"build-pool", {"cross-validate FC/BP classifiers and write the trial pool", ex::cmd_build_pool}},
        {"train", {"train the TD3 agent and the action blocker", ex::cmd_train}},
        {"evaluate", {"run every scheme over repetitions and both environments", ex::cmd_evaluate}},
        {"sweep-d", {"sweep the disparity d: closed form against Monte Carlo", ex::cmd_sweep_d}},
        {"export-plotdata", {"write long-format CSVs for plotting", ex::cmd_export_plotdata}},
    };
    std::string chosen;
    for (const auto& [name, entry] : commands) {
        app.add_subcommand(name, entry.first)->callback([&chosen, name = name] { chosen = name; });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    ex::ExperimentConfig cfg;
    try {
        auto kv = config_path.empty() ? eegcopilot::KeyValueConfig{} : eegcopilot::KeyValueConfig::load(config_path);
        if (seed) kv.set("seed", std::to_string(*seed));
        cfg = ex::load_experiment_config(kv);
    } catch (const eegcopilot::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    }

    const ex::OutputOptions out{out_dir, !no_timestamp};
    try {
        std::cout << commands.at(chosen).second(cfg, out);
    } catch (const eegcopilot::ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << chosen << " failed: " << e.what() << '\n';
        return kExitRuntime;
    }
    return 0;
}
