#include "eegcopilot/gridworld.hpp"

#include <cstdlib>
#include <stdexcept>
#include <string>

namespace eegcopilot {

Action action_from_index(int index) {
    if (index < 0 || index >= kNumActions) {
        throw std::out_of_range("action index " + std::to_string(index) + " outside 0..3");
    }
    return static_cast<Action>(index);
}

std::array<double, kNumActions> one_hot(Action a) {
    std::array<double, kNumActions> v{};
    v[index_of(a)] = 1.0;
    return v;
}

std::string_view to_string(Action a) {
    switch (a) {
        case Action::Left: return "Left";
        case Action::Right: return "Right";
        case Action::Up: return "Up";
        case Action::Down: return "Down";
    }
    return "?";
}

std::optional<Action> parse_action(std::string_view name) {
    for (Action a : kAllActions) {
        if (to_string(a) == name) return a;
    }
    return std::nullopt;
}

int manhattan(Cell a, Cell b) { return std::abs(a.x - b.x) + std::abs(a.y - b.y); }

Cell moved(Cell from, Action a) {
    switch (a) {
        case Action::Left: return {from.x - 1, from.y};
        case Action::Right: return {from.x + 1, from.y};
        case Action::Up: return {from.x, from.y + 1};
        case Action::Down: return {from.x, from.y - 1};
    }
    return from;
}

void EnvConfig::validate() const {
    if (grid_size < 2) throw std::invalid_argument("grid_size must be >= 2");
    if (!(invisible_spawn_prob >= 0.0 && invisible_spawn_prob <= 1.0)) {
        throw std::invalid_argument("invisible_spawn_prob must lie in [0, 1]");
    }
}

bool crosses_boundary(Cell player, Action a, const EnvConfig& config) {
    return !config.contains(moved(player, a));
}

namespace {

Cell random_cell(const EnvConfig& config, Rng& rng) {
    std::uniform_int_distribution<int> coord(0, config.grid_size - 1);
    const int x = coord(rng);
    const int y = coord(rng);
    return {x, y};
}

Cell random_cell_excluding(const EnvConfig& config, Rng& rng, Cell a, std::optional<Cell> b) {
    for (;;) {
        const Cell c = random_cell(config, rng);
        if (c != a && (!b || c != *b)) return c;
    }
}

void maybe_spawn_invisible(EnvState& state, const EnvConfig& config, Rng& rng) {
    if (state.invisible_target || config.invisible_spawn_prob <= 0.0) return;
    // A grid of 2 cells has nowhere left to put a third object.
    if (config.grid_size * config.grid_size < 3) return;
    std::bernoulli_distribution spawn(config.invisible_spawn_prob);
    if (spawn(rng)) {
        state.invisible_target = random_cell_excluding(config, rng, state.player, state.target);
    }
}

}  // namespace

EnvState reset(const EnvConfig& config, Rng& rng) {
    config.validate();
    EnvState state;
    state.player = config.center();
    state.target = random_cell_excluding(config, rng, state.player, std::nullopt);
    return state;
}

std::pair<EnvState, StepOutcome> step(const EnvState& state, Action action, const EnvConfig& config,
                                      Rng& rng) {
    EnvState next = state;
    StepOutcome out;
    ++next.step_count;

    const Cell dest = moved(state.player, action);
    if (!config.contains(dest)) {
        out.failed = true;
        out.terminal = true;
        out.reward = -config.fail_penalty;
        return {next, out};
    }

    const int before = manhattan(state.player, state.target);
    next.player = dest;

    if (dest == state.target) {
        out.reached_visible = true;
        out.reward = config.target_reward;
        next.target = random_cell_excluding(config, rng, dest, next.invisible_target);
    } else {
        const int after = manhattan(dest, state.target);
        out.reward = after < before ? config.shaping_reward : -config.shaping_reward;
    }

    if (next.invisible_target && dest == *next.invisible_target) {
        out.reached_invisible = true;
        next.invisible_target.reset();
    }

    maybe_spawn_invisible(next, config, rng);
    return {next, out};
}

std::pair<EnvState, StepOutcome> idle(const EnvState& state, const EnvConfig& config, Rng& rng) {
    EnvState next = state;
    ++next.step_count;
    maybe_spawn_invisible(next, config, rng);
    return {next, StepOutcome{}};
}

Observation observe_rl(const EnvState& state, const EnvConfig& config) {
    const double scale = 1.0 / static_cast<double>(config.grid_size - 1);
    return {state.player.x * scale, state.player.y * scale, state.target.x * scale,
            state.target.y * scale};
}

EnvState respawn_after_fail(const EnvState& state, const EnvConfig& config, Rng& rng) {
    EnvState next = reset(config, rng);
    next.step_count = state.step_count;
    return next;
}

}  // namespace eegcopilot
