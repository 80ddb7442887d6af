#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "eegcopilot/gridworld.hpp"
#include "eegcopilot/tinynet.hpp"

namespace eegcopilot::rl {

struct Transition {
    Observation s{};
    Action a = Action::Left;
    double r = 0.0;
    Observation s_next{};
    bool terminal = false;
    /// r_g: set iff the step produced a Failed event.
    bool failed = false;
};

/// Fixed-capacity ring buffer with uniform sampling over the filled slots.
class ReplayBuffer {
public:
    explicit ReplayBuffer(std::size_t capacity);

    void push(const Transition& t);
    std::size_t size() const { return data_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return data_.empty(); }
    const Transition& at(std::size_t i) const { return data_.at(i); }

    /// Draws `m` transitions uniformly with replacement; requires m <= size().
    std::vector<Transition> sample(std::size_t m, Rng& rng) const;

private:
    std::size_t capacity_;
    std::size_t next_ = 0;
    std::vector<Transition> data_;
};

/// Affine map applied to each observation component before any network.
struct InputTransform {
    double scale = 1.0;
    double offset = 0.0;
    double operator()(double v) const { return scale * (v - offset); }
};

struct Td3Config {
    /// Short horizon: shaping pays every step, so distant returns add little
    /// and gamma near 1 lets the -fail tail swamp the critics.
    double gamma = 0.5;
    double tau = 0.005;
    /// Actor steps once per policy_delay critic steps. With the softmax
    /// relaxation the actor already lags the critics; 2 collapsed more seeds.
    int policy_delay = 1;
    int batch_size = 256;
    std::size_t buffer_capacity = 50'000;
    std::int64_t train_steps = 100'000;
    std::int64_t warmup_steps = 1'000;
    /// Gradient updates per environment step.
    int updates_per_step = 1;
    double learning_rate = 3e-4;
    double epsilon_start = 1.0;
    double epsilon_end = 0.05;
    /// Fraction of train_steps over which epsilon is annealed linearly.
    double epsilon_anneal_fraction = 0.5;
    /// Episodes are truncated (not terminated) after this many steps.
    int max_episode_steps = 200;
    double blocker_threshold = 0.5;
    /// Share of each blocker minibatch made of exploratory boundary crossings
    /// (see exploratory_transition); the rest comes from replay. Real fails
    /// are ~0.3% of the stream, too few to keep the sigmoid out of saturation.
    double blocker_fail_fraction = 0.5;
    std::int64_t log_interval = 1'000;
    std::vector<int> hidden_sizes = {16, 8};
    /// Network input = state_scale * (observation - state_offset). The
    /// defaults give centred cell units on a 16-cell grid; raw [0, 1] inputs
    /// leave one step at 1/15, too fine for the critics to resolve.
    double state_scale = 15.0;
    double state_offset = 0.5;
    /// Snapshot evaluation every eval_interval steps: targets reached from the
    /// centre (all targets) and from eval_episodes fixed random start pairs,
    /// minus 10 per (edge cell, target) pair whose greedy action leaves the
    /// grid. The best snapshot is returned. 0 disables.
    std::int64_t eval_interval = 5'000;
    int eval_episodes = 200;
    /// Blocker updates after the main loop on exploratory transitions from
    /// uniformly drawn (player, target, action) triples, blocker_fail_fraction
    /// of each batch being failures. The replay stream alone covers edge
    /// states too thinly once the policy stops visiting them.
    std::int64_t blocker_refine_steps = 30'000;
    /// L2 penalty on actor logits; keeps the softmax away from saturation.
    double logit_l2 = 0.003;

    void validate() const;
    double epsilon_at(std::int64_t step) const;
};

class TrainingDiverged : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct Td3Agent {
    nn::Mlp actor;    // 4 -> logits over the 4 actions
    nn::Mlp critic1;  // 4 + one-hot(4) -> Q
    nn::Mlp critic2;
    nn::Mlp actor_target;
    nn::Mlp critic1_target;
    nn::Mlp critic2_target;
    nn::AdamState actor_opt;
    nn::AdamState critic1_opt;
    nn::AdamState critic2_opt;
    double gamma = 0.99;
    double tau = 0.005;
    int policy_delay = 2;
    double logit_l2 = 0.0;
    InputTransform input;

    static Td3Agent create(const Td3Config& config, Rng& rng);

    Eigen::VectorXd logits(const Observation& s) const;
    Action greedy(const Observation& s) const;
};

struct Blocker {
    nn::Mlp net;  // 4 + one-hot(4) -> risk in [0, 1]
    nn::AdamState opt;
    double threshold = 0.5;
    InputTransform input;

    static Blocker create(const Td3Config& config, Rng& rng);
    double risk(const Observation& s, Action a) const;
};

/// Index of the largest entry; ties resolve to the lowest index.
int argmax(const Eigen::VectorXd& v);

Action select_action(const Td3Agent& agent, const Observation& s, bool explore, double epsilon, Rng& rng);

/// Column j holds [in(s_j); one_hot(a_j)].
Eigen::MatrixXd state_action_batch(std::span<const Transition> batch, const InputTransform& in = {});

/// y = r + gamma * (1 - terminal) * min(Q1', Q2')(s', argmax actor'(s')).
Eigen::VectorXd critic_target(const Td3Agent& agent, std::span<const Transition> batch);

struct CriticLoss {
    double critic1 = 0.0;
    double critic2 = 0.0;
    double mean() const { return 0.5 * (critic1 + critic2); }
};

/// Regresses both critics toward the shared clipped target; returns the
/// pre-update mean squared TD errors.
CriticLoss update_critics(Td3Agent& agent, std::span<const Transition> batch);

/// -mean Q1(s, softmax(actor(s))) on the batch, without updating anything.
double actor_loss(const Td3Agent& agent, std::span<const Transition> batch);

/// Delayed policy step: acts only when step_counter % policy_delay == 0,
/// then soft-updates all three target networks. Returns the pre-update loss.
std::optional<double> update_actor_and_targets(Td3Agent& agent, std::span<const Transition> batch,
                                               std::int64_t step_counter);

/// Regresses the blocker toward the fail labels; returns the pre-update loss.
double train_blocker(Blocker& blocker, std::span<const Transition> batch);

/// b = 1 iff the predicted risk reaches the threshold.
bool assess_risk(const Blocker& blocker, const Observation& s, Action a);

struct TrainingLogEntry {
    std::int64_t step = 0;
    std::int64_t episodes = 0;
    double epsilon = 0.0;
    double critic_loss = 0.0;
    double actor_loss = 0.0;
    double blocker_loss = 0.0;
    std::int64_t fails = 0;
    std::int64_t targets_reached = 0;
    /// Snapshot score when evaluated at this step.
    std::optional<int> eval_score;
};

struct TrainResult {
    Td3Agent agent;
    Blocker blocker;
    std::vector<TrainingLogEntry> log;
};

struct GreedyEvaluation {
    int episodes = 0;
    int reached = 0;  // within Manhattan distance + 2 steps
    int fails = 0;
};

/// One step from a uniformly drawn player, target and action. With
/// require_fail the player is placed on the edge the action leaves through,
/// so the step fails and every crossing pair is equally likely.
Transition exploratory_transition(const EnvConfig& env_config, bool require_fail, Rng& rng);

/// Episodes start from reset(); invisible targets are disabled.
GreedyEvaluation evaluate_greedy(const Td3Agent& agent, const EnvConfig& env_config, int episodes,
                                 std::uint64_t seed);

TrainResult train_td3(const EnvConfig& env_config, const Td3Config& config, Rng& rng);

/// Checkpoints: "TD3A" | u32 version | f64 gamma | f64 tau | u32 policy_delay |
/// f64 input scale | f64 input offset | actor, critic1, critic2 (tinynet format). Optimiser state is not stored.
void save_agent(std::ostream& out, const Td3Agent& agent);
Td3Agent load_agent(std::istream& in);

/// "BLKR" | u32 version | f64 threshold | f64 input scale | f64 input offset |
/// network (tinynet format).
void save_blocker(std::ostream& out, const Blocker& blocker);
Blocker load_blocker(std::istream& in);

}  // namespace eegcopilot::rl
