#include "eegcopilot/arbitration.hpp"

#include <algorithm>
#include <cctype>
#include <string>

namespace eegcopilot::copilot {

std::string_view to_string(Scheme s) {
    switch (s) {
        case Scheme::TD3: return "TD3";
        case Scheme::EEG_NB: return "EEG_NB";
        case Scheme::EEG_FB: return "EEG_FB";
        case Scheme::Co_NB: return "Co_NB";
        case Scheme::Co_PPB: return "Co_PPB";
        case Scheme::Co_FB: return "Co_FB";
        case Scheme::Co_FB_SP: return "Co_FB_SP";
        case Scheme::EEG_NB_SC: return "EEG_NB_SC";
    }
    return "?";
}

std::optional<Scheme> parse_scheme(std::string_view name) {
    auto norm = [](std::string_view s) {
        std::string out(s);
        for (char& c : out) c = c == '-' ? '_' : static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
        return out;
    };
    const std::string wanted = norm(name);
    for (Scheme s : kAllSchemes) {
        if (norm(to_string(s)) == wanted) return s;
    }
    return std::nullopt;
}

bool uses_human(Scheme s) { return s != Scheme::TD3; }

bool uses_blocker(Scheme s) {
    return s == Scheme::EEG_FB || s == Scheme::Co_PPB || s == Scheme::Co_FB || s == Scheme::Co_FB_SP;
}

std::string_view to_string(Branch b) {
    switch (b) {
        case Branch::Agree: return "Agree";
        case Branch::MatchTD3: return "MatchTD3";
        case Branch::FusedPP: return "FusedPP";
        case Branch::Blocked: return "Blocked";
        case Branch::Pure: return "Pure";
    }
    return "?";
}

std::string_view to_string(ActingAgent a) {
    switch (a) {
        case ActingAgent::Human: return "Human";
        case ActingAgent::RL: return "RL";
        case ActingAgent::Shared: return "Shared";
        case ActingAgent::None: return "None";
    }
    return "?";
}

namespace {

DecisionRecord pure_rl(DecisionRecord rec) {
    rec.branch = Branch::Pure;
    rec.a_final = rec.a_r;
    rec.acting_agent = ActingAgent::RL;
    return rec;
}

// Layers 1-4 of the copilot tree.
DecisionRecord copilot_tree(DecisionRecord rec, const human::HumanDecodedAction& h, const BlockFn* blocker) {
    Action candidate;
    if (h.a_fc == h.a_bp) {
        rec.branch = Branch::Agree;
        rec.acting_agent = ActingAgent::Human;
        candidate = h.a_fc;
    } else if (rec.a_r == h.a_fc || rec.a_r == h.a_bp) {
        rec.branch = Branch::MatchTD3;
        rec.acting_agent = ActingAgent::Shared;
        candidate = rec.a_r;
    } else {
        rec.branch = Branch::FusedPP;
        rec.acting_agent = ActingAgent::Human;
        candidate = h.a_pp;
    }

    const bool check = rec.scheme == Scheme::Co_FB || rec.scheme == Scheme::Co_FB_SP ||
                       (rec.scheme == Scheme::Co_PPB && rec.branch == Branch::FusedPP);
    if (check && (*blocker)(candidate)) {
        rec.blocked = true;
        rec.branch = Branch::Blocked;
        rec.acting_agent = ActingAgent::RL;
        candidate = rec.a_r;
    }
    rec.a_final = candidate;
    return rec;
}

}  // namespace

DecisionRecord decide(Scheme scheme, const human::HumanDecodedAction* human, Action a_r, const BlockFn* blocker,
                      const EnvState& state) {
    if (uses_human(scheme) && human == nullptr) {
        throw std::invalid_argument(std::string("scheme ") + std::string(to_string(scheme)) + " needs human input");
    }
    if (uses_blocker(scheme) && (blocker == nullptr || !*blocker)) {
        throw MissingBlocker(std::string("scheme ") + std::string(to_string(scheme)) + " needs a blocker");
    }

    DecisionRecord rec;
    rec.scheme = scheme;
    rec.a_r = a_r;
    if (human) rec.human = *human;
    const bool invisible_active = state.invisible_target.has_value();

    switch (scheme) {
        case Scheme::TD3:
            return pure_rl(rec);
        case Scheme::EEG_NB:
            rec.a_final = human->a_pp;
            rec.acting_agent = ActingAgent::Human;
            return rec;
        case Scheme::EEG_FB:
            if ((*blocker)(human->a_pp)) {
                rec.blocked = true;
                rec.branch = Branch::Blocked;
                rec.a_final.reset();
                rec.acting_agent = ActingAgent::None;
            } else {
                rec.a_final = human->a_pp;
                rec.acting_agent = ActingAgent::Human;
            }
            return rec;
        case Scheme::Co_NB:
        case Scheme::Co_PPB:
        case Scheme::Co_FB:
            return copilot_tree(rec, *human, blocker);
        case Scheme::Co_FB_SP:
            return invisible_active ? copilot_tree(rec, *human, blocker) : pure_rl(rec);
        case Scheme::EEG_NB_SC:
            if (!invisible_active) return pure_rl(rec);
            rec.a_final = human->a_pp;
            rec.acting_agent = ActingAgent::Human;
            return rec;
    }
    return rec;
}

}  // namespace eegcopilot::copilot
