#pragma once

#include <functional>
#include <optional>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "eegcopilot/gridworld.hpp"
#include "eegcopilot/human_agent.hpp"

namespace eegcopilot::copilot {

enum class Scheme { TD3, EEG_NB, EEG_FB, Co_NB, Co_PPB, Co_FB, Co_FB_SP, EEG_NB_SC };

inline constexpr std::array<Scheme, 8> kAllSchemes = {Scheme::TD3,   Scheme::EEG_NB, Scheme::EEG_FB,
                                                      Scheme::Co_NB, Scheme::Co_PPB, Scheme::Co_FB,
                                                      Scheme::Co_FB_SP, Scheme::EEG_NB_SC};

std::string_view to_string(Scheme s);
/// Accepts the enumerator names, with '-' or '_' as separator, any case.
std::optional<Scheme> parse_scheme(std::string_view name);

bool uses_human(Scheme s);
bool uses_blocker(Scheme s);

enum class Branch { Agree, MatchTD3, FusedPP, Blocked, Pure };
enum class ActingAgent { Human, RL, Shared, None };

std::string_view to_string(Branch b);
std::string_view to_string(ActingAgent a);

struct DecisionRecord {
    Scheme scheme = Scheme::TD3;
    std::optional<human::HumanDecodedAction> human;
    Action a_r = Action::Left;
    Branch branch = Branch::Pure;
    /// Empty means Halt: the player does not move this step.
    std::optional<Action> a_final;
    ActingAgent acting_agent = ActingAgent::RL;
    bool blocked = false;

    friend bool operator==(const DecisionRecord&, const DecisionRecord&) = default;
};

/// b(a) for the current state: true when the action is flagged risky.
using BlockFn = std::function<bool(Action)>;

class MissingBlocker : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// One arbitration step. `human` may be null only for the TD3 scheme and
/// `blocker` only for schemes without blocking.
DecisionRecord decide(Scheme scheme, const human::HumanDecodedAction* human, Action a_r, const BlockFn* blocker,
                      const EnvState& state);

}  // namespace eegcopilot::copilot
