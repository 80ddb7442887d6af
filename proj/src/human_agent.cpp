#include "eegcopilot/human_agent.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

namespace eegcopilot::human {

Action intended_action(const EnvState& state) {
    const Cell goal = state.invisible_target ? *state.invisible_target : state.target;
    const int dx = goal.x - state.player.x;
    const int dy = goal.y - state.player.y;
    if (dx == 0 && dy == 0) return Action::Left;
    if (std::abs(dx) >= std::abs(dy)) return dx > 0 ? Action::Right : Action::Left;
    return dy > 0 ? Action::Up : Action::Down;
}

TrialPool::TrialPool(std::vector<eeg::ClassifiedTrial> trials) : trials_(std::move(trials)) {
    for (std::size_t i = 0; i < trials_.size(); ++i) {
        const int y = trials_[i].label_true;
        if (y < 0 || y >= kNumActions) throw std::invalid_argument("TrialPool: label out of range");
        by_class_[static_cast<std::size_t>(y)].push_back(i);
    }
    for (int k = 0; k < kNumActions; ++k) {
        if (by_class_[static_cast<std::size_t>(k)].empty()) {
            throw std::invalid_argument("TrialPool: class " + std::to_string(k) + " has no trials");
        }
    }
}

const eeg::ClassifiedTrial& TrialPool::draw(int cls, Rng& rng) const {
    const auto& members = by_class_.at(static_cast<std::size_t>(cls));
    std::uniform_int_distribution<std::size_t> pick(0, members.size() - 1);
    return trials_[members[pick(rng)]];
}

namespace {

HumanDecodedAction assemble(Action intended, int fc, int bp, const Posterior& p_fc, const Posterior& p_bp) {
    HumanDecodedAction h;
    h.intended = intended;
    h.a_fc = action_from_index(fc);
    h.a_bp = action_from_index(bp);
    h.posterior_fc = p_fc;
    h.posterior_bp = p_bp;
    const auto fused = eeg::fuse_posteriors(p_fc, p_bp);
    h.posterior_pp = fused.posterior;
    h.a_pp = fused.action;
    return h;
}

int draw_row(const std::array<double, kNumActions>& row, Rng& rng) {
    std::discrete_distribution<int> dist(row.begin(), row.end());
    return dist(rng);
}

}  // namespace

HumanDecodedAction decode_from_pool(const TrialPool& pool, Action intended, Rng& rng) {
    const auto& t = pool.draw(index_of(intended), rng);
    return assemble(intended, t.label_fc, t.label_bp, t.posterior_fc, t.posterior_bp);
}

void SurrogateSpec::validate() const {
    for (const Confusion* c : {&confusion_fc, &confusion_bp}) {
        for (const auto& row : *c) {
            double sum = 0.0;
            for (double v : row) {
                if (!(v >= 0.0)) throw std::invalid_argument("confusion entries must be non-negative");
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-9) throw std::invalid_argument("confusion rows must sum to 1");
        }
    }
    if (!(rho >= 0.0 && rho <= 1.0)) throw std::invalid_argument("rho must lie in [0, 1]");
    if (!(kappa > 0.0)) throw std::invalid_argument("kappa must be positive");
}

SurrogateSpec SurrogateSpec::symmetric(double diagonal, double rho, double kappa) {
    if (!(diagonal >= 0.0 && diagonal <= 1.0)) throw std::invalid_argument("diagonal must lie in [0, 1]");
    SurrogateSpec s;
    const double off = (1.0 - diagonal) / (kNumActions - 1);
    for (int i = 0; i < kNumActions; ++i) {
        for (int j = 0; j < kNumActions; ++j) {
            s.confusion_fc[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = i == j ? diagonal : off;
        }
    }
    s.confusion_bp = s.confusion_fc;
    s.rho = rho;
    s.kappa = kappa;
    return s;
}

Posterior peaked_posterior(Action label, double kappa) {
    Posterior p;
    p.fill(1.0 / (kappa + 3.0));
    p[static_cast<std::size_t>(index_of(label))] = kappa / (kappa + 3.0);
    return p;
}

HumanDecodedAction decode_from_surrogate(const SurrogateSpec& spec, Action intended, Rng& rng) {
    const auto k = static_cast<std::size_t>(index_of(intended));
    const int fc = draw_row(spec.confusion_fc[k], rng);
    std::bernoulli_distribution couple(spec.rho);
    const int bp = couple(rng) ? fc : draw_row(spec.confusion_bp[k], rng);
    return assemble(intended, fc, bp, peaked_posterior(action_from_index(fc), spec.kappa),
                    peaked_posterior(action_from_index(bp), spec.kappa));
}

SurrogateStats surrogate_stats(const SurrogateSpec& spec) {
    spec.validate();
    SurrogateStats s;
    for (int k = 0; k < kNumActions; ++k) {
        const auto& row_fc = spec.confusion_fc[static_cast<std::size_t>(k)];
        const auto& row_bp = spec.confusion_bp[static_cast<std::size_t>(k)];
        for (int i = 0; i < kNumActions; ++i) {
            for (int j = 0; j < kNumActions; ++j) {
                const double p_bp = spec.rho * (i == j ? 1.0 : 0.0) + (1.0 - spec.rho) * row_bp[static_cast<std::size_t>(j)];
                const double p = 0.25 * row_fc[static_cast<std::size_t>(i)] * p_bp;
                if (p == 0.0) continue;
                const auto fused = eeg::fuse_posteriors(peaked_posterior(action_from_index(i), spec.kappa),
                                                        peaked_posterior(action_from_index(j), spec.kappa));
                s.agreement += i == j ? p : 0.0;
                s.union_accuracy += (i == k || j == k) ? p : 0.0;
                s.fused_accuracy += index_of(fused.action) == k ? p : 0.0;
            }
        }
    }
    return s;
}

double calibrate_symmetric(double target, double rho, double kappa) {
    auto fused_at = [&](double diag) { return surrogate_stats(SurrogateSpec::symmetric(diag, rho, kappa)).fused_accuracy; };
    double lo = 0.25, hi = 1.0;
    if (target < fused_at(lo) - 1e-12 || target > fused_at(hi) + 1e-12) {
        throw std::invalid_argument("fused accuracy " + std::to_string(target) + " is out of reach for this surrogate");
    }
    // Fused accuracy is increasing in the diagonal above chance.
    for (int it = 0; it < 100; ++it) {
        const double mid = 0.5 * (lo + hi);
        (fused_at(mid) < target ? lo : hi) = mid;
    }
    return 0.5 * (lo + hi);
}

void write_pool(std::ostream& out, std::span<const eeg::ClassifiedTrial> trials) {
    out << "pool trials=" << trials.size() << '\n';
    out << std::setprecision(17);
    for (const auto& t : trials) {
        out << t.label_true << ' ' << t.label_fc << ' ' << t.label_bp;
        for (double v : t.posterior_fc) out << ' ' << v;
        for (double v : t.posterior_bp) out << ' ' << v;
        out << '\n';
    }
}

std::vector<eeg::ClassifiedTrial> read_pool(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    auto next = [&]() {
        while (std::getline(in, line)) {
            ++line_no;
            const auto first = line.find_first_not_of(" \t\r");
            if (first != std::string::npos && line[first] != '#') return true;
        }
        return false;
    };
    if (!next()) throw eeg::ParseError("empty pool file", 1, 1);
    long n = -1;
    {
        std::istringstream ss(line);
        std::string magic, field;
        ss >> magic >> field;
        if (magic != "pool" || field.rfind("trials=", 0) != 0) {
            throw eeg::ParseError("expected 'pool trials=<n>' header", line_no, 1);
        }
        std::istringstream num(field.substr(7));
        if (!(num >> n) || n < 0) throw eeg::ParseError("malformed trial count", line_no, 6);
    }
    std::vector<eeg::ClassifiedTrial> out;
    out.reserve(static_cast<std::size_t>(n));
    for (long t = 0; t < n; ++t) {
        if (!next()) throw eeg::ParseError("pool ends after " + std::to_string(t) + " records", line_no + 1, 1);
        std::istringstream ss(line);
        eeg::ClassifiedTrial ct;
        ct.trial_index = static_cast<std::size_t>(t);
        if (!(ss >> ct.label_true >> ct.label_fc >> ct.label_bp)) {
            throw eeg::ParseError("expected three integer labels", line_no, 1);
        }
        for (int lbl : {ct.label_true, ct.label_fc, ct.label_bp}) {
            if (lbl < 0 || lbl >= kNumActions) throw eeg::ParseError("label must lie in 0..3", line_no, 1);
        }
        for (double& v : ct.posterior_fc) {
            if (!(ss >> v)) throw eeg::ParseError("expected 8 posterior values", line_no, line.size() + 1);
        }
        for (double& v : ct.posterior_bp) {
            if (!(ss >> v)) throw eeg::ParseError("expected 8 posterior values", line_no, line.size() + 1);
        }
        std::string extra;
        if (ss >> extra) throw eeg::ParseError("unexpected trailing field '" + extra + "'", line_no, line.find(extra) + 1);
        out.push_back(ct);
    }
    if (next()) throw eeg::ParseError("unexpected content after the last record", line_no, 1);
    return out;
}

}  // namespace eegcopilot::human
