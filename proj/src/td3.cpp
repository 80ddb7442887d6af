#include "eegcopilot/td3.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <istream>
#include <limits>
#include <ostream>
#include <string>

namespace eegcopilot::rl {

ReplayBuffer::ReplayBuffer(std::size_t capacity) : capacity_(capacity) {
    if (capacity == 0) throw std::invalid_argument("ReplayBuffer capacity must be positive");
    data_.reserve(capacity);
}

void ReplayBuffer::push(const Transition& t) {
    if (data_.size() < capacity_) {
        data_.push_back(t);
    } else {
        data_[next_] = t;
    }
    next_ = (next_ + 1) % capacity_;
}

std::vector<Transition> ReplayBuffer::sample(std::size_t m, Rng& rng) const {
    if (m > data_.size()) throw std::invalid_argument("ReplayBuffer::sample: minibatch exceeds fill level");
    std::uniform_int_distribution<std::size_t> pick(0, data_.size() - 1);
    std::vector<Transition> out;
    out.reserve(m);
    for (std::size_t i = 0; i < m; ++i) out.push_back(data_[pick(rng)]);
    return out;
}

void Td3Config::validate() const {
    if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0, 1)");
    if (!(tau >= 0.0 && tau <= 1.0)) throw std::invalid_argument("tau must lie in [0, 1]");
    if (policy_delay < 1) throw std::invalid_argument("policy_delay must be >= 1");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (warmup_steps < batch_size) throw std::invalid_argument("warmup_steps must be >= batch_size");
    if (blocker_fail_fraction < 0.0 || blocker_fail_fraction > 1.0) {
        throw std::invalid_argument("blocker_fail_fraction must lie in [0, 1]");
    }
    if (log_interval < 1) throw std::invalid_argument("log_interval must be >= 1");
    if (!(state_scale > 0.0)) throw std::invalid_argument("state_scale must be positive");
    if (!std::isfinite(state_offset)) throw std::invalid_argument("state_offset must be finite");
    if (eval_interval < 0 || eval_episodes < 1) throw std::invalid_argument("eval settings must be non-negative");
    if (!(logit_l2 >= 0.0)) throw std::invalid_argument("logit_l2 must be non-negative");
    if (blocker_refine_steps < 0) throw std::invalid_argument("blocker_refine_steps must be non-negative");
    if (train_steps < 0) throw std::invalid_argument("train_steps must be non-negative");
    if (updates_per_step < 1) throw std::invalid_argument("updates_per_step must be >= 1");
    if (buffer_capacity == 0) throw std::invalid_argument("buffer_capacity must be positive");
    if (!(learning_rate > 0.0)) throw std::invalid_argument("learning_rate must be positive");
    if (max_episode_steps < 1) throw std::invalid_argument("max_episode_steps must be >= 1");
}

double Td3Config::epsilon_at(std::int64_t step) const {
    const double horizon = epsilon_anneal_fraction * static_cast<double>(train_steps);
    if (horizon <= 0.0) return epsilon_end;
    const double frac = std::clamp(static_cast<double>(step) / horizon, 0.0, 1.0);
    return epsilon_start + frac * (epsilon_end - epsilon_start);
}

namespace {

std::vector<int> layer_sizes(int in, const std::vector<int>& hidden, int out) {
    std::vector<int> sizes{in};
    sizes.insert(sizes.end(), hidden.begin(), hidden.end());
    sizes.push_back(out);
    return sizes;
}

Eigen::VectorXd state_action_vector(const Observation& s, Action a, const InputTransform& in) {
    Eigen::VectorXd x = Eigen::VectorXd::Zero(8);
    for (int i = 0; i < 4; ++i) x(i) = in(s[i]);
    x(4 + index_of(a)) = 1.0;
    return x;
}

Eigen::MatrixXd states(std::span<const Transition> batch, bool next, const InputTransform& in) {
    Eigen::MatrixXd m(4, static_cast<Eigen::Index>(batch.size()));
    for (std::size_t j = 0; j < batch.size(); ++j) {
        const auto& s = next ? batch[j].s_next : batch[j].s;
        for (int i = 0; i < 4; ++i) m(i, static_cast<Eigen::Index>(j)) = in(s[i]);
    }
    return m;
}

Eigen::MatrixXd softmax_columns(const Eigen::MatrixXd& logits) {
    Eigen::MatrixXd p(logits.rows(), logits.cols());
    for (Eigen::Index j = 0; j < logits.cols(); ++j) {
        const Eigen::VectorXd z = logits.col(j).array() - logits.col(j).maxCoeff();
        const Eigen::VectorXd e = z.array().exp();
        p.col(j) = e / e.sum();
    }
    return p;
}

void check_finite(double loss, const nn::Mlp& net, const char* what) {
    if (!std::isfinite(loss) || !net.all_finite()) {
        throw TrainingDiverged(std::string("training diverged: non-finite ") + what);
    }
}

}  // namespace

Td3Agent Td3Agent::create(const Td3Config& config, Rng& rng) {
    config.validate();
    Td3Agent agent;
    agent.actor = nn::Mlp(layer_sizes(4, config.hidden_sizes, 4), nn::Activation::Relu,
                          nn::Activation::Linear, rng);
    agent.critic1 = nn::Mlp(layer_sizes(8, config.hidden_sizes, 1), nn::Activation::Relu,
                            nn::Activation::Linear, rng);
    agent.critic2 = nn::Mlp(layer_sizes(8, config.hidden_sizes, 1), nn::Activation::Relu,
                            nn::Activation::Linear, rng);
    agent.actor_target = agent.actor;
    agent.critic1_target = agent.critic1;
    agent.critic2_target = agent.critic2;
    agent.actor_opt = nn::AdamState::for_net(agent.actor, config.learning_rate);
    agent.critic1_opt = nn::AdamState::for_net(agent.critic1, config.learning_rate);
    agent.critic2_opt = nn::AdamState::for_net(agent.critic2, config.learning_rate);
    agent.gamma = config.gamma;
    agent.tau = config.tau;
    agent.policy_delay = config.policy_delay;
    agent.logit_l2 = config.logit_l2;
    agent.input = {config.state_scale, config.state_offset};
    return agent;
}

Eigen::VectorXd Td3Agent::logits(const Observation& s) const {
    Eigen::Vector4d x;
    for (int i = 0; i < 4; ++i) x(i) = input(s[i]);
    return actor.forward(x);
}

Action Td3Agent::greedy(const Observation& s) const { return action_from_index(argmax(logits(s))); }

Blocker Blocker::create(const Td3Config& config, Rng& rng) {
    config.validate();
    Blocker b;
    b.net = nn::Mlp(layer_sizes(8, config.hidden_sizes, 1), nn::Activation::Relu, nn::Activation::Sigmoid,
                    rng);
    b.opt = nn::AdamState::for_net(b.net, config.learning_rate);
    b.threshold = config.blocker_threshold;
    b.input = {config.state_scale, config.state_offset};
    return b;
}

double Blocker::risk(const Observation& s, Action a) const { return net.forward(state_action_vector(s, a, input))(0); }

int argmax(const Eigen::VectorXd& v) {
    int best = 0;
    for (int i = 1; i < v.size(); ++i) {
        if (v(i) > v(best)) best = i;
    }
    return best;
}

Action select_action(const Td3Agent& agent, const Observation& s, bool explore, double epsilon, Rng& rng) {
    if (explore && epsilon > 0.0) {
        std::bernoulli_distribution coin(epsilon);
        if (coin(rng)) {
            std::uniform_int_distribution<int> pick(0, kNumActions - 1);
            return action_from_index(pick(rng));
        }
    }
    return agent.greedy(s);
}

Eigen::MatrixXd state_action_batch(std::span<const Transition> batch, const InputTransform& in) {
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(8, static_cast<Eigen::Index>(batch.size()));
    for (std::size_t j = 0; j < batch.size(); ++j) {
        x.col(static_cast<Eigen::Index>(j)) = state_action_vector(batch[j].s, batch[j].a, in);
    }
    return x;
}

Eigen::VectorXd critic_target(const Td3Agent& agent, std::span<const Transition> batch) {
    const auto n = static_cast<Eigen::Index>(batch.size());
    const Eigen::MatrixXd next = states(batch, true, agent.input);
    const Eigen::MatrixXd next_logits = agent.actor_target.forward_batch(next);
    Eigen::MatrixXd x = Eigen::MatrixXd::Zero(8, n);
    x.topRows(4) = next;
    for (Eigen::Index j = 0; j < n; ++j) x(4 + argmax(next_logits.col(j)), j) = 1.0;
    const Eigen::RowVectorXd q1 = agent.critic1_target.forward_batch(x).row(0);
    const Eigen::RowVectorXd q2 = agent.critic2_target.forward_batch(x).row(0);
    Eigen::VectorXd y(n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto& t = batch[static_cast<std::size_t>(j)];
        const double bootstrap = t.terminal ? 0.0 : agent.gamma * std::min(q1(j), q2(j));
        y(j) = t.r + bootstrap;
    }
    return y;
}

namespace {

double regress_critic(nn::Mlp& critic, nn::AdamState& opt, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
    nn::Tape tape;
    const Eigen::RowVectorXd q = critic.forward_batch(x, tape).row(0);
    const Eigen::RowVectorXd residual = q - y.transpose();
    const double m = static_cast<double>(y.size());
    const double loss = residual.squaredNorm() / m;
    const Eigen::MatrixXd upstream = (2.0 / m) * residual;
    nn::adam_step(critic, opt, critic.backward(tape, upstream));
    check_finite(loss, critic, "critic loss");
    return loss;
}

}  // namespace

CriticLoss update_critics(Td3Agent& agent, std::span<const Transition> batch) {
    if (batch.empty()) throw std::invalid_argument("update_critics: empty minibatch");
    const Eigen::VectorXd y = critic_target(agent, batch);
    const Eigen::MatrixXd x = state_action_batch(batch, agent.input);
    CriticLoss loss;
    loss.critic1 = regress_critic(agent.critic1, agent.critic1_opt, x, y);
    loss.critic2 = regress_critic(agent.critic2, agent.critic2_opt, x, y);
    return loss;
}

double actor_loss(const Td3Agent& agent, std::span<const Transition> batch) {
    const Eigen::MatrixXd s = states(batch, false, agent.input);
    Eigen::MatrixXd x(8, s.cols());
    x.topRows(4) = s;
    x.bottomRows(4) = softmax_columns(agent.actor.forward_batch(s));
    return -agent.critic1.forward_batch(x).row(0).mean();
}

std::optional<double> update_actor_and_targets(Td3Agent& agent, std::span<const Transition> batch,
                                               std::int64_t step_counter) {
    if (step_counter % agent.policy_delay != 0) return std::nullopt;
    if (batch.empty()) throw std::invalid_argument("update_actor_and_targets: empty minibatch");

    const Eigen::MatrixXd s = states(batch, false, agent.input);
    const double m = static_cast<double>(s.cols());
    nn::Tape actor_tape;
    const Eigen::MatrixXd logits = agent.actor.forward_batch(s, actor_tape);
    const Eigen::MatrixXd probs = softmax_columns(logits);
    Eigen::MatrixXd x(8, s.cols());
    x.topRows(4) = s;
    x.bottomRows(4) = probs;

    nn::Tape critic_tape;
    const Eigen::RowVectorXd q = agent.critic1.forward_batch(x, critic_tape).row(0);
    const double loss = -q.mean();
    const Eigen::MatrixXd dq = Eigen::MatrixXd::Constant(1, s.cols(), -1.0 / m);
    const nn::Gradients critic_grads = agent.critic1.backward(critic_tape, dq);
    const Eigen::MatrixXd d_probs = critic_grads.input.bottomRows(4);

    // Softmax Jacobian-vector product, column by column.
    Eigen::MatrixXd d_logits(4, s.cols());
    for (Eigen::Index j = 0; j < s.cols(); ++j) {
        const double dot = probs.col(j).dot(d_probs.col(j));
        d_logits.col(j) = probs.col(j).cwiseProduct(d_probs.col(j).array().matrix() -
                                                    Eigen::VectorXd::Constant(4, dot));
    }
    if (agent.logit_l2 > 0.0) d_logits += (agent.logit_l2 / m) * logits;
    nn::adam_step(agent.actor, agent.actor_opt, agent.actor.backward(actor_tape, d_logits));
    check_finite(loss, agent.actor, "actor loss");

    nn::soft_update(agent.actor_target, agent.actor, agent.tau);
    nn::soft_update(agent.critic1_target, agent.critic1, agent.tau);
    nn::soft_update(agent.critic2_target, agent.critic2, agent.tau);
    return loss;
}

double train_blocker(Blocker& blocker, std::span<const Transition> batch) {
    if (batch.empty()) throw std::invalid_argument("train_blocker: empty minibatch");
    const Eigen::MatrixXd x = state_action_batch(batch, blocker.input);
    nn::Tape tape;
    const Eigen::RowVectorXd risk = blocker.net.forward_batch(x, tape).row(0);
    Eigen::RowVectorXd residual(risk.size());
    for (Eigen::Index j = 0; j < risk.size(); ++j) {
        residual(j) = risk(j) - (batch[static_cast<std::size_t>(j)].failed ? 1.0 : 0.0);
    }
    const double m = static_cast<double>(risk.size());
    const double loss = residual.squaredNorm() / m;
    nn::adam_step(blocker.net, blocker.opt, blocker.net.backward(tape, (2.0 / m) * residual));
    check_finite(loss, blocker.net, "blocker loss");
    return loss;
}

bool assess_risk(const Blocker& blocker, const Observation& s, Action a) {
    return blocker.risk(s, a) >= blocker.threshold;
}

namespace {

// Class-balanced: fail_share exploratory boundary crossings, the rest replay.
std::vector<Transition> blocker_minibatch(const ReplayBuffer& replay, const EnvConfig& env, std::size_t m,
                                          std::size_t fail_share, Rng& rng) {
    auto batch = replay.sample(m - fail_share, rng);
    for (std::size_t i = 0; i < fail_share; ++i) batch.push_back(exploratory_transition(env, true, rng));
    return batch;
}

}  // namespace

Transition exploratory_transition(const EnvConfig& env_config, bool require_fail, Rng& rng) {
    const int last = env_config.grid_size - 1;
    std::uniform_int_distribution<int> coord(0, last);
    std::uniform_int_distribution<int> pick(0, kNumActions - 1);
    EnvState s;
    const Action a = action_from_index(pick(rng));
    s.player = {coord(rng), coord(rng)};
    if (require_fail) {
        // Put the player on the edge the action leaves through: uniform over
        // all (cell, outward action) pairs.
        switch (a) {
            case Action::Left: s.player.x = 0; break;
            case Action::Right: s.player.x = last; break;
            case Action::Up: s.player.y = last; break;
            case Action::Down: s.player.y = 0; break;
        }
    }
    do {
        s.target = {coord(rng), coord(rng)};
    } while (s.target == s.player);
    auto [next, outcome] = step(s, a, env_config, rng);
    return {observe_rl(s, env_config), a, outcome.reward, observe_rl(next, env_config), outcome.terminal,
            outcome.failed};
}

GreedyEvaluation evaluate_greedy(const Td3Agent& agent, const EnvConfig& env_config, int episodes,
                                 std::uint64_t seed) {
    EnvConfig env = env_config;
    env.invisible_spawn_prob = 0.0;
    Rng rng(seed);
    GreedyEvaluation ev;
    ev.episodes = episodes;
    for (int k = 0; k < episodes; ++k) {
        EnvState s = reset(env, rng);
        const int budget = manhattan(s.player, s.target) + 2;
        for (int i = 0; i < budget; ++i) {
            auto [next, outcome] = step(s, agent.greedy(observe_rl(s, env)), env, rng);
            if (outcome.failed) {
                ++ev.fails;
                break;
            }
            if (outcome.reached_visible) {
                ++ev.reached;
                break;
            }
            s = next;
        }
    }
    return ev;
}

namespace {

// Greedy episode from a given start; 1 reached in budget, -1 failed, 0 otherwise.
int greedy_episode(const Td3Agent& agent, const EnvConfig& env, EnvState s, Rng& rng) {
    const int budget = manhattan(s.player, s.target) + 2;
    for (int i = 0; i < budget; ++i) {
        auto [next, outcome] = step(s, agent.greedy(observe_rl(s, env)), env, rng);
        if (outcome.failed) return -1;
        if (outcome.reached_visible) return 1;
        s = next;
    }
    return 0;
}

// Snapshot score: targets reached from the centre (all of them) and from fixed
// random start pairs, minus 10 per unsafe pair. A pair is unsafe when the
// greedy action crosses the boundary from an edge cell; that is the only way
// to fail, so the count covers every start the agent can reach.
int snapshot_score(const Td3Agent& agent, const EnvConfig& env_config, int random_pairs, std::uint64_t seed) {
    EnvConfig env = env_config;
    env.invisible_spawn_prob = 0.0;
    Rng rng(seed);
    int reached = 0;
    const int g = env.grid_size;
    const Cell centre = env.center();
    for (int x = 0; x < g; ++x) {
        for (int y = 0; y < g; ++y) {
            if (Cell{x, y} == centre) continue;
            reached += greedy_episode(agent, env, EnvState{centre, Cell{x, y}, std::nullopt, 0}, rng) == 1;
        }
    }
    std::uniform_int_distribution<int> coord(0, g - 1);
    for (int k = 0; k < random_pairs; ++k) {
        EnvState s;
        s.player = {coord(rng), coord(rng)};
        do {
            s.target = {coord(rng), coord(rng)};
        } while (s.target == s.player);
        reached += greedy_episode(agent, env, s, rng) == 1;
    }
    int unsafe = 0;
    for (int px = 0; px < g; ++px) {
        for (int py = 0; py < g; ++py) {
            if (px != 0 && py != 0 && px != g - 1 && py != g - 1) continue;
            for (int tx = 0; tx < g; ++tx) {
                for (int ty = 0; ty < g; ++ty) {
                    const EnvState s{Cell{px, py}, Cell{tx, ty}, std::nullopt, 0};
                    if (s.target == s.player) continue;
                    unsafe += crosses_boundary(s.player, agent.greedy(observe_rl(s, env)), env);
                }
            }
        }
    }
    return reached - 10 * unsafe;
}

}  // namespace

TrainResult train_td3(const EnvConfig& env_config, const Td3Config& config, Rng& rng) {
    env_config.validate();
    config.validate();
    TrainResult result{Td3Agent::create(config, rng), Blocker::create(config, rng), {}};
    Td3Agent& agent = result.agent;
    Blocker& blocker = result.blocker;

    ReplayBuffer replay(config.buffer_capacity);
    const auto m = static_cast<std::size_t>(config.batch_size);
    const auto fail_share = static_cast<std::size_t>(std::lround(config.blocker_fail_fraction * static_cast<double>(m)));

    const std::uint64_t eval_seed = rng();
    std::optional<Td3Agent> best;
    int best_score = std::numeric_limits<int>::min();

    EnvState state = reset(env_config, rng);
    int episode_steps = 0;
    std::int64_t update_counter = 0;
    TrainingLogEntry window;
    double critic_sum = 0.0, actor_sum = 0.0, blocker_sum = 0.0;
    std::int64_t critic_n = 0, actor_n = 0, blocker_n = 0;

    for (std::int64_t t = 0; t < config.train_steps; ++t) {
        const double eps = config.epsilon_at(t);
        const Observation obs = observe_rl(state, env_config);
        const Action a = select_action(agent, obs, true, eps, rng);
        auto [next, outcome] = step(state, a, env_config, rng);

        Transition tr{obs, a, outcome.reward, observe_rl(next, env_config), outcome.terminal, outcome.failed};
        replay.push(tr);
        if (tr.failed) ++window.fails;
        if (outcome.reached_visible) ++window.targets_reached;

        ++episode_steps;
        if (outcome.terminal || episode_steps >= config.max_episode_steps) {
            state = reset(env_config, rng);
            episode_steps = 0;
            ++window.episodes;
        } else {
            state = next;
        }

        if (t + 1 >= config.warmup_steps && replay.size() >= m) {
            for (int u = 0; u < config.updates_per_step; ++u) {
                const auto batch = replay.sample(m, rng);
                critic_sum += update_critics(agent, batch).mean();
                ++critic_n;
                if (auto la = update_actor_and_targets(agent, batch, update_counter)) {
                    actor_sum += *la;
                    ++actor_n;
                }
                ++update_counter;

                blocker_sum += train_blocker(blocker, blocker_minibatch(replay, env_config, m, fail_share, rng));
                ++blocker_n;
            }
        }

        if (config.eval_interval > 0 && (t + 1) % config.eval_interval == 0 && t + 1 >= config.warmup_steps) {
            const int score = snapshot_score(agent, env_config, config.eval_episodes, eval_seed);
            window.eval_score = score;
            if (score >= best_score) {
                best_score = score;
                best = agent;
            }
        }

        if ((t + 1) % config.log_interval == 0) {
            window.step = t + 1;
            window.epsilon = eps;
            window.critic_loss = critic_n ? critic_sum / static_cast<double>(critic_n) : 0.0;
            window.actor_loss = actor_n ? actor_sum / static_cast<double>(actor_n) : 0.0;
            window.blocker_loss = blocker_n ? blocker_sum / static_cast<double>(blocker_n) : 0.0;
            result.log.push_back(window);
            window = TrainingLogEntry{};
            critic_sum = actor_sum = blocker_sum = 0.0;
            critic_n = actor_n = blocker_n = 0;
        }
    }
    if (best) agent = std::move(*best);

    for (std::int64_t u = 0; u < config.blocker_refine_steps; ++u) {
        std::vector<Transition> batch;
        batch.reserve(m);
        for (std::size_t i = 0; i < m; ++i) batch.push_back(exploratory_transition(env_config, i < fail_share, rng));
        train_blocker(blocker, batch);
    }
    return result;
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}
void put_f64(std::ostream& out, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}
std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("checkpoint: truncated header");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}
double get_f64(std::istream& in) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("checkpoint: truncated header");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}
void expect_magic(std::istream& in, const char* magic) {
    char got[4];
    if (!in.read(got, 4) || std::string(got, 4) != std::string(magic, 4)) {
        throw std::runtime_error(std::string("checkpoint: expected ") + magic + " header");
    }
}

}  // namespace

void save_agent(std::ostream& out, const Td3Agent& agent) {
    out.write("TD3A", 4);
    put_u32(out, 1);
    put_f64(out, agent.gamma);
    put_f64(out, agent.tau);
    put_u32(out, static_cast<std::uint32_t>(agent.policy_delay));
    put_f64(out, agent.input.scale);
    put_f64(out, agent.input.offset);
    nn::save(out, agent.actor);
    nn::save(out, agent.critic1);
    nn::save(out, agent.critic2);
}

Td3Agent load_agent(std::istream& in) {
    expect_magic(in, "TD3A");
    if (get_u32(in) != 1) throw std::runtime_error("checkpoint: unsupported agent version");
    Td3Agent agent;
    agent.gamma = get_f64(in);
    agent.tau = get_f64(in);
    agent.policy_delay = static_cast<int>(get_u32(in));
    agent.input.scale = get_f64(in);
    agent.input.offset = get_f64(in);
    agent.actor = nn::load(in);
    agent.critic1 = nn::load(in);
    agent.critic2 = nn::load(in);
    agent.actor_target = agent.actor;
    agent.critic1_target = agent.critic1;
    agent.critic2_target = agent.critic2;
    agent.actor_opt = nn::AdamState::for_net(agent.actor);
    agent.critic1_opt = nn::AdamState::for_net(agent.critic1);
    agent.critic2_opt = nn::AdamState::for_net(agent.critic2);
    return agent;
}

void save_blocker(std::ostream& out, const Blocker& blocker) {
    out.write("BLKR", 4);
    put_u32(out, 1);
    put_f64(out, blocker.threshold);
    put_f64(out, blocker.input.scale);
    put_f64(out, blocker.input.offset);
    nn::save(out, blocker.net);
}

Blocker load_blocker(std::istream& in) {
    expect_magic(in, "BLKR");
    if (get_u32(in) != 1) throw std::runtime_error("checkpoint: unsupported blocker version");
    Blocker b;
    b.threshold = get_f64(in);
    b.input.scale = get_f64(in);
    b.input.offset = get_f64(in);
    b.net = nn::load(in);
    b.opt = nn::AdamState::for_net(b.net);
    return b;
}

}  // namespace eegcopilot::rl
