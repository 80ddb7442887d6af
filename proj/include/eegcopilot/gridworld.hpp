#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <utility>

namespace eegcopilot {

using Rng = std::mt19937_64;

/// Player command. The numeric value is the class index shared by the
/// decoders, the actor logits and the one-hot critic input.
enum class Action : std::uint8_t { Left = 0, Right = 1, Up = 2, Down = 3 };

inline constexpr int kNumActions = 4;
inline constexpr std::array<Action, kNumActions> kAllActions = {Action::Left, Action::Right,
                                                                Action::Up, Action::Down};

constexpr int index_of(Action a) { return static_cast<int>(a); }
Action action_from_index(int index);
std::array<double, kNumActions> one_hot(Action a);
std::string_view to_string(Action a);
std::optional<Action> parse_action(std::string_view name);

struct Cell {
    int x = 0;
    int y = 0;
    friend auto operator<=>(const Cell&, const Cell&) = default;
};

int manhattan(Cell a, Cell b);

/// Cell reached by one move, possibly outside the grid. Up increases y.
Cell moved(Cell from, Action a);

struct EnvConfig {
    int grid_size = 16;
    double invisible_spawn_prob = 0.01;
    double shaping_reward = 0.5;
    double fail_penalty = 10.0;
    /// Reward handed to the learner when the visible target is reached.
    double target_reward = 1.0;
    std::uint64_t rng_seed = 0;

    void validate() const;
    bool contains(Cell c) const { return c.x >= 0 && c.y >= 0 && c.x < grid_size && c.y < grid_size; }
    Cell center() const { return {(grid_size - 1) / 2, (grid_size - 1) / 2}; }
};

struct EnvState {
    Cell player;
    Cell target;
    std::optional<Cell> invisible_target;
    std::int64_t step_count = 0;

    friend bool operator==(const EnvState&, const EnvState&) = default;
};

struct StepOutcome {
    double reward = 0.0;
    bool reached_visible = false;
    bool reached_invisible = false;
    bool failed = false;
    bool terminal = false;
};

using Observation = std::array<double, 4>;

EnvState reset(const EnvConfig& config, Rng& rng);

std::pair<EnvState, StepOutcome> step(const EnvState& state, Action action, const EnvConfig& config,
                                      Rng& rng);

/// A step in which the player does not move (a halted command). The clock
/// advances and an invisible target may still appear.
std::pair<EnvState, StepOutcome> idle(const EnvState& state, const EnvConfig& config, Rng& rng);

/// (player.x, player.y, target.x, target.y) scaled to [0, 1]. The invisible
/// target is never part of the observation.
Observation observe_rl(const EnvState& state, const EnvConfig& config);

/// Recentres the player after a failure and redraws targets; the step count
/// carries over.
EnvState respawn_after_fail(const EnvState& state, const EnvConfig& config, Rng& rng);

/// True when `a` from `player` would leave the grid.
bool crosses_boundary(Cell player, Action a, const EnvConfig& config);

}  // namespace eegcopilot
