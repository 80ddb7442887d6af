#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "eegcopilot/td3.hpp"

using namespace eegcopilot;
using namespace eegcopilot::rl;

namespace {

Td3Config small_config() {
    Td3Config c;
    c.train_steps = 3000;
    c.warmup_steps = 500;
    c.batch_size = 32;
    c.log_interval = 500;
    c.eval_interval = 1000;
    c.eval_episodes = 20;
    c.blocker_refine_steps = 200;
    return c;
}

std::vector<Transition> random_batch(std::size_t n, Rng& rng) {
    EnvConfig env;
    std::vector<Transition> out;
    for (std::size_t i = 0; i < n; ++i) out.push_back(exploratory_transition(env, false, rng));
    return out;
}

}  // namespace

TEST_CASE("replay buffer overwrites the oldest entry once full") {
    ReplayBuffer buf(3);
    for (int i = 0; i < 5; ++i) {
        Transition t;
        t.r = i;
        buf.push(t);
    }
    CHECK(buf.size() == 3);
    std::vector<double> rewards;
    for (std::size_t i = 0; i < buf.size(); ++i) rewards.push_back(buf.at(i).r);
    std::sort(rewards.begin(), rewards.end());
    CHECK(rewards == std::vector<double>{2, 3, 4});
    Rng rng(1);
    CHECK(buf.sample(3, rng).size() == 3);
    CHECK_THROWS_AS(buf.sample(4, rng), std::invalid_argument);
    CHECK_THROWS_AS(ReplayBuffer{0}, std::invalid_argument);
}

TEST_CASE("epsilon anneals linearly then holds") {
    Td3Config c;
    c.train_steps = 1000;
    c.epsilon_anneal_fraction = 0.5;
    CHECK(c.epsilon_at(0) == c.epsilon_start);
    CHECK(c.epsilon_at(250) == doctest::Approx(0.5 * (c.epsilon_start + c.epsilon_end)));
    CHECK(c.epsilon_at(500) == doctest::Approx(c.epsilon_end));
    CHECK(c.epsilon_at(999) == doctest::Approx(c.epsilon_end));
}

TEST_CASE("argmax breaks ties toward the lowest index") {
    Eigen::VectorXd v(4);
    v << 1.0, 3.0, 3.0, 2.0;
    CHECK(argmax(v) == 1);
    v.setConstant(0.5);
    CHECK(argmax(v) == 0);
}

TEST_CASE("critic target is the clipped double-Q bootstrap") {
    Rng rng(11);
    Td3Config cfg;
    cfg.gamma = 0.9;
    const auto agent = Td3Agent::create(cfg, rng);
    auto batch = random_batch(16, rng);
    batch[0].terminal = true;
    const Eigen::VectorXd y = critic_target(agent, batch);
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const auto& t = batch[j];
        Eigen::VectorXd s(4);
        for (int k = 0; k < 4; ++k) s(k) = agent.input(t.s_next[static_cast<std::size_t>(k)]);
        const int a = argmax(agent.actor_target.forward(s));
        Eigen::VectorXd x = Eigen::VectorXd::Zero(8);
        x.head(4) = s;
        x(4 + a) = 1.0;
        const double q = std::min(agent.critic1_target.forward(x)(0), agent.critic2_target.forward(x)(0));
        const double expect = t.r + (t.terminal ? 0.0 : cfg.gamma * q);
        CHECK(y(static_cast<Eigen::Index>(j)) == doctest::Approx(expect).epsilon(1e-12));
    }
}

TEST_CASE("critic updates fit a fixed target") {
    Rng rng(12);
    Td3Config cfg;
    cfg.learning_rate = 1e-2;
    auto agent = Td3Agent::create(cfg, rng);
    auto batch = random_batch(64, rng);
    for (auto& t : batch) t.terminal = true;  // target = reward, independent of the nets
    const double first = update_critics(agent, batch).mean();
    double last = first;
    for (int i = 0; i < 300; ++i) last = update_critics(agent, batch).mean();
    CHECK(last < 0.5 * first);
}

TEST_CASE("actor updates are delayed and raise Q1") {
    Rng rng(13);
    Td3Config cfg;
    cfg.learning_rate = 1e-2;
    cfg.policy_delay = 2;
    auto agent = Td3Agent::create(cfg, rng);
    const auto batch = random_batch(64, rng);
    CHECK_FALSE(update_actor_and_targets(agent, batch, 1).has_value());
    const auto target_before = agent.actor_target;
    const double before = actor_loss(agent, batch);
    for (int i = 0; i < 50; ++i) update_actor_and_targets(agent, batch, 2 * i);
    CHECK(actor_loss(agent, batch) < before);
    CHECK_FALSE(agent.actor_target == target_before);
}

TEST_CASE("exploratory transitions honour the fail request") {
    Rng rng(14);
    EnvConfig env;
    for (int i = 0; i < 100; ++i) {
        const auto t = exploratory_transition(env, true, rng);
        CHECK(t.failed);
        CHECK(t.terminal);
        CHECK(t.r == -env.fail_penalty);
    }
}

TEST_CASE("blocker learns to separate boundary crossings") {
    Rng rng(15);
    Td3Config cfg;
    cfg.learning_rate = 3e-3;
    auto blocker = Blocker::create(cfg, rng);
    EnvConfig env;
    for (int it = 0; it < 3000; ++it) {
        std::vector<Transition> batch;
        for (int i = 0; i < 64; ++i) batch.push_back(exploratory_transition(env, i < 32, rng));
        train_blocker(blocker, batch);
    }
    EnvState s;
    s.target = {8, 8};
    s.player = {0, 5};
    CHECK(assess_risk(blocker, observe_rl(s, env), Action::Left));
    s.player = {7, 7};
    for (Action a : kAllActions) CHECK_FALSE(assess_risk(blocker, observe_rl(s, env), a));
}

TEST_CASE("short training run logs every interval and keeps weights finite") {
    Rng rng(16);
    const auto cfg = small_config();
    const auto result = train_td3(EnvConfig{}, cfg, rng);
    REQUIRE(result.log.size() == 6);
    CHECK(result.log.back().step == 3000);
    CHECK_FALSE(result.log.front().eval_score.has_value());
    CHECK(result.log[1].eval_score.has_value());
    CHECK(result.agent.actor.all_finite());
    CHECK(result.blocker.net.all_finite());
}

TEST_CASE("training is reproducible under a seed") {
    auto cfg = small_config();
    cfg.train_steps = 1000;
    Rng a(17), b(17);
    const auto ra = train_td3(EnvConfig{}, cfg, a);
    const auto rb = train_td3(EnvConfig{}, cfg, b);
    CHECK(ra.agent.actor == rb.agent.actor);
    CHECK(ra.blocker.net == rb.blocker.net);
}

TEST_CASE("checkpoints round-trip and reject foreign data") {
    Rng rng(18);
    Td3Config cfg;
    const auto agent = Td3Agent::create(cfg, rng);
    const auto blocker = Blocker::create(cfg, rng);
    std::stringstream sa, sb;
    save_agent(sa, agent);
    save_blocker(sb, blocker);
    const auto agent2 = load_agent(sa);
    const auto blocker2 = load_blocker(sb);
    CHECK(agent2.actor == agent.actor);
    CHECK(agent2.critic2 == agent.critic2);
    CHECK(agent2.gamma == agent.gamma);
    CHECK(agent2.input.scale == agent.input.scale);
    CHECK(blocker2.net == blocker.net);
    CHECK(blocker2.threshold == blocker.threshold);
    std::stringstream wrong(sb.str());
    CHECK_THROWS(load_agent(wrong));
}

TEST_CASE("invalid hyperparameters are rejected") {
    Td3Config c;
    c.gamma = 1.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = Td3Config{};
    c.warmup_steps = 10;
    c.batch_size = 64;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = Td3Config{};
    c.state_scale = 0.0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}
