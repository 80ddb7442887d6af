#include <doctest.h>

#include <cmath>

#include "eegcopilot/arbitration.hpp"
#include "eegcopilot/disparity.hpp"

using namespace eegcopilot;
using namespace eegcopilot::copilot;

namespace {

human::HumanDecodedAction decoded(Action fc, Action bp, Action pp) {
    human::HumanDecodedAction h;
    h.a_fc = fc;
    h.a_bp = bp;
    h.a_pp = pp;
    return h;
}

EnvState plain_state(bool invisible = false) {
    EnvState s;
    s.player = {5, 5};
    s.target = {9, 9};
    if (invisible) s.invisible_target = Cell{1, 1};
    return s;
}

}  // namespace

TEST_CASE("scheme names parse case-insensitively") {
    for (Scheme s : kAllSchemes) CHECK(parse_scheme(to_string(s)) == s);
    CHECK(parse_scheme("co-fb") == Scheme::Co_FB);
    CHECK(parse_scheme("eeg_nb_sc") == Scheme::EEG_NB_SC);
    CHECK_FALSE(parse_scheme("Co_XX").has_value());
    CHECK_FALSE(uses_human(Scheme::TD3));
    CHECK(uses_blocker(Scheme::EEG_FB));
    CHECK_FALSE(uses_blocker(Scheme::Co_NB));
}

TEST_CASE("layer 1: agreement hands control to the human") {
    const auto h = decoded(Action::Up, Action::Up, Action::Up);
    const auto r = decide(Scheme::Co_NB, &h, Action::Left, nullptr, plain_state());
    CHECK(r.branch == Branch::Agree);
    CHECK(r.a_final == Action::Up);
    CHECK(r.acting_agent == ActingAgent::Human);
}

TEST_CASE("layer 2: a TD3 match is shared control") {
    const auto h = decoded(Action::Up, Action::Right, Action::Up);
    const auto r = decide(Scheme::Co_NB, &h, Action::Right, nullptr, plain_state());
    CHECK(r.branch == Branch::MatchTD3);
    CHECK(r.a_final == Action::Right);
    CHECK(r.acting_agent == ActingAgent::Shared);
}

TEST_CASE("layer 3: otherwise the fused decision acts") {
    const auto h = decoded(Action::Up, Action::Right, Action::Right);
    const auto r = decide(Scheme::Co_NB, &h, Action::Down, nullptr, plain_state());
    CHECK(r.branch == Branch::FusedPP);
    CHECK(r.a_final == Action::Right);
    CHECK(r.acting_agent == ActingAgent::Human);
}

TEST_CASE("layer 4: blocking depends on the scheme") {
    const BlockFn block_up = [](Action a) { return a == Action::Up; };
    const auto agree = decoded(Action::Up, Action::Up, Action::Up);
    const auto fused = decoded(Action::Up, Action::Right, Action::Up);

    auto r = decide(Scheme::Co_FB, &agree, Action::Left, &block_up, plain_state());
    CHECK(r.blocked);
    CHECK(r.a_final == Action::Left);
    CHECK(r.acting_agent == ActingAgent::RL);

    r = decide(Scheme::Co_PPB, &agree, Action::Left, &block_up, plain_state());
    CHECK_FALSE(r.blocked);
    CHECK(r.a_final == Action::Up);

    r = decide(Scheme::Co_PPB, &fused, Action::Down, &block_up, plain_state());
    CHECK(r.blocked);
    CHECK(r.a_final == Action::Down);

    r = decide(Scheme::Co_NB, &fused, Action::Down, &block_up, plain_state());
    CHECK_FALSE(r.blocked);
    CHECK(r.a_final == Action::Up);
}

TEST_CASE("EEG schemes act on the fused decision; EEG_FB halts when blocked") {
    const BlockFn block_up = [](Action a) { return a == Action::Up; };
    const auto h = decoded(Action::Up, Action::Right, Action::Up);
    auto r = decide(Scheme::EEG_NB, &h, Action::Left, nullptr, plain_state());
    CHECK(r.a_final == Action::Up);
    r = decide(Scheme::EEG_FB, &h, Action::Left, &block_up, plain_state());
    CHECK(r.blocked);
    CHECK_FALSE(r.a_final.has_value());
    CHECK(r.acting_agent == ActingAgent::None);
}

TEST_CASE("situational schemes use pure RL without an invisible target") {
    const BlockFn never = [](Action) { return false; };
    const auto h = decoded(Action::Up, Action::Up, Action::Up);
    auto r = decide(Scheme::Co_FB_SP, &h, Action::Left, &never, plain_state(false));
    CHECK(r.branch == Branch::Pure);
    CHECK(r.a_final == Action::Left);
    r = decide(Scheme::Co_FB_SP, &h, Action::Left, &never, plain_state(true));
    CHECK(r.branch == Branch::Agree);
    r = decide(Scheme::EEG_NB_SC, &h, Action::Left, nullptr, plain_state(false));
    CHECK(r.a_final == Action::Left);
    r = decide(Scheme::EEG_NB_SC, &h, Action::Left, nullptr, plain_state(true));
    CHECK(r.a_final == Action::Up);
}

TEST_CASE("missing inputs are reported") {
    const auto h = decoded(Action::Up, Action::Up, Action::Up);
    CHECK_THROWS_AS(decide(Scheme::Co_FB, &h, Action::Left, nullptr, plain_state()), MissingBlocker);
    CHECK_THROWS_AS(decide(Scheme::EEG_NB, nullptr, Action::Left, nullptr, plain_state()), std::invalid_argument);
    const auto r = decide(Scheme::TD3, nullptr, Action::Down, nullptr, plain_state());
    CHECK(r.a_final == Action::Down);
    CHECK(r.acting_agent == ActingAgent::RL);
}

TEST_CASE("disparity weights follow the closed forms") {
    const auto m = DisparityModel::derive(0.3, 0.6, 0.1, 0.8, 0.7);
    CHECK(m.w1r == doctest::Approx(0.6 * 0.7));
    CHECK(m.w2 == doctest::Approx(0.7 * 0.4));
    CHECK(m.w3e == doctest::Approx(0.3 * 0.4));
    CHECK(m.w3r == doctest::Approx(0.3 * 0.4 * 0.7));
    CHECK(m.w4r == doctest::Approx(0.1 * (0.6 + 0.12)));
    CHECK(m.w5e == doctest::Approx(0.9 * (0.6 + 0.12)));
    const auto a = authority(m);
    CHECK(a.human == doctest::Approx(1.0 - m.w4r));
    CHECK(a.rl == doctest::Approx(m.w1r + m.w2 + m.w3r + m.w4r));
    CHECK(copilot_accuracy(m) == doctest::Approx(((0.6 + 0.28) * 0.8 + 0.12 * 0.7) * 0.9));
    CHECK_THROWS(DisparityModel::derive(1.2, 0.5, 0.0, 0.5, 0.5));
}

TEST_CASE("authority collapses exactly at the extremes") {
    for (double w1e : {0.0, 0.3, 0.9}) {
        const auto zero = authority(DisparityModel::derive(0.0, w1e, 0.0, 0.7, 0.6));
        CHECK(zero.human == 1.0);
        CHECK(zero.rl == 1.0);
        const auto one = authority(DisparityModel::derive(1.0, w1e, 0.0, 0.7, 0.6));
        CHECK(one.rl == 0.0);
    }
}

TEST_CASE("Monte Carlo agrees with the closed forms") {
    const auto m = DisparityModel::derive(0.4, 0.5, 0.08, 0.75, 0.6);
    const auto mc = monte_carlo_authority(m, 200'000, 9, 4, 2);
    CHECK(std::abs(mc.ath_e - authority(m).human) < 0.01);
    CHECK(std::abs(mc.ath_r - authority(m).rl) < 0.01);
    CHECK(std::abs(mc.acc_c - copilot_accuracy(m)) < 0.01);
    CHECK(mc.samples == 200'000);
    const auto again = monte_carlo_authority(m, 200'000, 9, 4, 1);
    CHECK(again.ath_r == mc.ath_r);
    CHECK_THROWS(monte_carlo_authority(m, 100, 1));
}

TEST_CASE("model estimates from a surrogate use its exact statistics") {
    const auto spec = human::SurrogateSpec::symmetric(0.7, 0.3, 6.0);
    const auto stats = human::surrogate_stats(spec);
    const auto m = estimate_model_from_data(spec, 0.2, 0.05);
    CHECK(m.w1e == doctest::Approx(stats.agreement));
    CHECK(m.acc_e1 == doctest::Approx(stats.union_accuracy));
    CHECK(m.acc_pp == doctest::Approx(stats.fused_accuracy));
}
