#include <doctest.h>

#include <stdexcept>

#include "eegcopilot/gridworld.hpp"

using namespace eegcopilot;

TEST_CASE("actions round-trip through index, name and one-hot") {
    for (Action a : kAllActions) {
        CHECK(action_from_index(index_of(a)) == a);
        CHECK(parse_action(to_string(a)) == a);
        const auto v = one_hot(a);
        double sum = 0.0;
        for (double x : v) sum += x;
        CHECK(sum == 1.0);
        CHECK(v[static_cast<std::size_t>(index_of(a))] == 1.0);
    }
    CHECK_THROWS_AS(action_from_index(4), std::out_of_range);
    CHECK_FALSE(parse_action("Jump").has_value());
}

TEST_CASE("moves follow the axis convention") {
    const Cell c{5, 5};
    CHECK(moved(c, Action::Left) == Cell{4, 5});
    CHECK(moved(c, Action::Right) == Cell{6, 5});
    CHECK(moved(c, Action::Up) == Cell{5, 6});
    CHECK(moved(c, Action::Down) == Cell{5, 4});
    CHECK(manhattan({0, 0}, {3, 4}) == 7);
}

TEST_CASE("reset puts the player at the centre and the target elsewhere") {
    EnvConfig cfg;
    Rng rng(3);
    for (int i = 0; i < 200; ++i) {
        const auto s = reset(cfg, rng);
        CHECK(s.player == cfg.center());
        CHECK(s.target != s.player);
        CHECK(cfg.contains(s.target));
        CHECK_FALSE(s.invisible_target.has_value());
    }
}

TEST_CASE("crossing the boundary fails with the penalty and leaves the player in place") {
    EnvConfig cfg;
    Rng rng(1);
    EnvState s;
    s.player = {0, 7};
    s.target = {9, 9};
    CHECK(crosses_boundary(s.player, Action::Left, cfg));
    const auto [next, out] = step(s, Action::Left, cfg, rng);
    CHECK(out.failed);
    CHECK(out.terminal);
    CHECK(out.reward == -cfg.fail_penalty);
    CHECK(next.player == s.player);
}

TEST_CASE("shaping rewards approach and penalises retreat") {
    EnvConfig cfg;
    cfg.invisible_spawn_prob = 0.0;
    Rng rng(1);
    EnvState s;
    s.player = {5, 5};
    s.target = {9, 5};
    CHECK(step(s, Action::Right, cfg, rng).second.reward == cfg.shaping_reward);
    CHECK(step(s, Action::Left, cfg, rng).second.reward == -cfg.shaping_reward);
}

TEST_CASE("reaching the visible target rewards and respawns it") {
    EnvConfig cfg;
    cfg.invisible_spawn_prob = 0.0;
    Rng rng(2);
    EnvState s;
    s.player = {5, 5};
    s.target = {6, 5};
    const auto [next, out] = step(s, Action::Right, cfg, rng);
    CHECK(out.reached_visible);
    CHECK(out.reward == cfg.target_reward);
    CHECK(next.target != next.player);
    CHECK(next.step_count == 1);
}

TEST_CASE("the invisible target is collected silently") {
    EnvConfig cfg;
    cfg.invisible_spawn_prob = 0.0;
    Rng rng(2);
    EnvState s;
    s.player = {5, 5};
    s.target = {0, 0};
    s.invisible_target = Cell{5, 6};
    const auto [next, out] = step(s, Action::Up, cfg, rng);
    CHECK(out.reached_invisible);
    CHECK_FALSE(out.reached_visible);
    CHECK_FALSE(next.invisible_target.has_value());
    CHECK(observe_rl(s, cfg) == observe_rl(EnvState{s.player, s.target, std::nullopt, 0}, cfg));
}

TEST_CASE("invisible targets spawn at the configured rate") {
    EnvConfig cfg;
    cfg.invisible_spawn_prob = 0.2;
    Rng rng(9);
    int spawned = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
        EnvState s;
        s.player = {3, 3};
        s.target = {10, 10};
        if (idle(s, cfg, rng).first.invisible_target) ++spawned;
    }
    CHECK(static_cast<double>(spawned) / n == doctest::Approx(0.2).epsilon(0.05));
}

TEST_CASE("observations are normalised and stepping is deterministic under a seed") {
    EnvConfig cfg;
    EnvState s;
    s.player = {15, 0};
    s.target = {0, 15};
    const auto o = observe_rl(s, cfg);
    CHECK(o[0] == 1.0);
    CHECK(o[1] == 0.0);
    CHECK(o[3] == 1.0);

    Rng a(77), b(77);
    auto sa = reset(cfg, a), sb = reset(cfg, b);
    for (int i = 0; i < 500; ++i) {
        const Action act = kAllActions[static_cast<std::size_t>(i % 4)];
        auto [na, oa] = step(sa, act, cfg, a);
        auto [nb, ob] = step(sb, act, cfg, b);
        if (oa.failed) na = respawn_after_fail(na, cfg, a);
        if (ob.failed) nb = respawn_after_fail(nb, cfg, b);
        sa = na;
        sb = nb;
    }
    CHECK(sa == sb);
}

TEST_CASE("invalid environment settings are rejected") {
    EnvConfig cfg;
    cfg.grid_size = 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg.grid_size = 16;
    cfg.invisible_spawn_prob = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}
