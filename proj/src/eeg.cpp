#include "eegcopilot/eeg.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <sstream>

namespace eegcopilot::eeg {

Eigen::MatrixXd pearson_fc(const Trial& trial) {
    const Eigen::Index nc = trial.data.rows();
    const Eigen::Index nt = trial.data.cols();
    if (nc < 2 || nt < 2) throw EegError("pearson_fc: need at least 2 channels and 2 samples");
    Eigen::MatrixXd centered = trial.data.colwise() - trial.data.rowwise().mean();
    Eigen::VectorXd norms(nc);
    for (Eigen::Index c = 0; c < nc; ++c) {
        norms(c) = centered.row(c).norm();
        const double scale = trial.data.row(c).cwiseAbs().maxCoeff();
        if (norms(c) <= 1e-12 * scale * std::sqrt(static_cast<double>(nt)) || norms(c) == 0.0) {
            throw EegError("pearson_fc: channel " + std::to_string(c) + " has zero variance");
        }
    }
    for (Eigen::Index c = 0; c < nc; ++c) centered.row(c) /= norms(c);
    Eigen::MatrixXd r = centered * centered.transpose();
    for (Eigen::Index i = 0; i < nc; ++i) {
        r(i, i) = 1.0;
        for (Eigen::Index j = i + 1; j < nc; ++j) {
            const double v = std::clamp(0.5 * (r(i, j) + r(j, i)), -1.0, 1.0);
            r(i, j) = v;
            r(j, i) = v;
        }
    }
    return r;
}

Eigen::VectorXd upper_triangle(const Eigen::MatrixXd& m) {
    const Eigen::Index n = m.rows();
    Eigen::VectorXd v(n * (n - 1) / 2);
    Eigen::Index k = 0;
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = i + 1; j < n; ++j) v(k++) = m(i, j);
    }
    return v;
}

Eigen::MatrixXd band_power(const Trial& trial) {
    const Eigen::Index nc = trial.data.rows();
    const Eigen::Index n = trial.data.cols();
    if (n < 4) throw EegError("band_power: need at least 4 samples");
    if (!(trial.fs > 0.0)) throw EegError("band_power: sampling rate must be positive");

    // exp(-i 2 pi k n / N) depends only on (k n) mod N.
    std::vector<double> cos_table(static_cast<std::size_t>(n)), sin_table(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) {
        const double phase = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n);
        cos_table[static_cast<std::size_t>(i)] = std::cos(phase);
        sin_table[static_cast<std::size_t>(i)] = std::sin(phase);
    }

    Eigen::MatrixXd power = Eigen::MatrixXd::Zero(kNumBands, nc);
    const Eigen::Index nyquist_bin = n / 2;
    for (Eigen::Index k = 0; k <= nyquist_bin; ++k) {
        const double f = static_cast<double>(k) * trial.fs / static_cast<double>(n);
        int band = -1;
        for (int b = 0; b < kNumBands; ++b) {
            if (f >= kBands[b].low && f < kBands[b].high) band = b;
        }
        if (band < 0) continue;
        const bool unpaired = (k == 0) || (n % 2 == 0 && k == nyquist_bin);
        const double weight = unpaired ? 1.0 : 2.0;
        for (Eigen::Index c = 0; c < nc; ++c) {
            double re = 0.0, im = 0.0;
            for (Eigen::Index t = 0; t < n; ++t) {
                const auto idx = static_cast<std::size_t>((k * t) % n);
                const double x = trial.data(c, t);
                re += x * cos_table[idx];
                im -= x * sin_table[idx];
            }
            power(band, c) += weight * (re * re + im * im);
        }
    }
    return power;
}

Eigen::VectorXd fc_features(const Trial& trial) { return upper_triangle(pearson_fc(trial)); }

Eigen::VectorXd bp_features(const Trial& trial) {
    const Eigen::MatrixXd p = band_power(trial);
    Eigen::VectorXd v(p.size());
    Eigen::Index k = 0;
    for (Eigen::Index b = 0; b < p.rows(); ++b) {
        for (Eigen::Index c = 0; c < p.cols(); ++c) v(k++) = p(b, c);
    }
    return v;
}

LdaModel lda_fit(std::span<const Eigen::VectorXd> features, std::span<const int> labels, double lambda,
                 int n_classes) {
    if (features.size() != labels.size()) throw EegError("lda_fit: features and labels differ in length");
    if (features.empty()) throw EegError("lda_fit: no training samples");
    if (lambda < 0.0 || lambda > 1.0) throw EegError("lda_fit: shrinkage must lie in [0, 1]");
    const Eigen::Index p = features.front().size();
    std::vector<int> counts(static_cast<std::size_t>(n_classes), 0);
    LdaModel model;
    model.lambda = lambda;
    model.means.assign(static_cast<std::size_t>(n_classes), Eigen::VectorXd::Zero(p));
    for (std::size_t i = 0; i < features.size(); ++i) {
        if (features[i].size() != p) throw EegError("lda_fit: feature vectors differ in length");
        const int y = labels[i];
        if (y < 0 || y >= n_classes) throw EegError("lda_fit: label " + std::to_string(y) + " out of range");
        model.means[static_cast<std::size_t>(y)] += features[i];
        ++counts[static_cast<std::size_t>(y)];
    }
    for (int k = 0; k < n_classes; ++k) {
        if (counts[static_cast<std::size_t>(k)] < 2) {
            throw EegError("lda_fit: class " + std::to_string(k) + " has fewer than 2 samples");
        }
        model.means[static_cast<std::size_t>(k)] /= counts[static_cast<std::size_t>(k)];
    }

    Eigen::MatrixXd scatter = Eigen::MatrixXd::Zero(p, p);
    for (std::size_t i = 0; i < features.size(); ++i) {
        const Eigen::VectorXd d = features[i] - model.means[static_cast<std::size_t>(labels[i])];
        scatter.selfadjointView<Eigen::Lower>().rankUpdate(d);
    }
    scatter = scatter.selfadjointView<Eigen::Lower>();
    const double dof = static_cast<double>(features.size()) - n_classes;
    const Eigen::MatrixXd pooled = scatter / std::max(dof, 1.0);
    const double nu = pooled.trace() / static_cast<double>(p);
    model.covariance = (1.0 - lambda) * pooled;
    model.covariance.diagonal().array() += lambda * nu;

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(model.covariance, Eigen::EigenvaluesOnly);
    const double max_ev = eig.eigenvalues().maxCoeff();
    const double min_ev = eig.eigenvalues().minCoeff();
    if (!(max_ev > 0.0) || min_ev <= 1e-12 * max_ev) {
        throw EegError("lda_fit: covariance is singular; use shrinkage lambda > 0");
    }
    model.factor.compute(model.covariance);
    if (model.factor.info() != Eigen::Success) {
        throw EegError("lda_fit: covariance is not positive definite; use shrinkage lambda > 0");
    }

    model.priors.resize(n_classes);
    for (int k = 0; k < n_classes; ++k) {
        model.priors(k) = static_cast<double>(counts[static_cast<std::size_t>(k)]) /
                          static_cast<double>(features.size());
    }
    return model;
}

Eigen::VectorXd lda_posterior(const LdaModel& model, const Eigen::VectorXd& x) {
    if (x.size() != model.dimension()) throw EegError("lda_posterior: feature dimension mismatch");
    const int k_max = model.classes();
    Eigen::VectorXd score(k_max);
    for (int k = 0; k < k_max; ++k) {
        const Eigen::VectorXd d = x - model.means[static_cast<std::size_t>(k)];
        score(k) = std::log(model.priors(k)) - 0.5 * d.dot(model.factor.solve(d));
    }
    score.array() -= score.maxCoeff();
    Eigen::VectorXd post = score.array().exp();
    return post / post.sum();
}

int argmax(std::span<const double> v) {
    int best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (v[i] > v[static_cast<std::size_t>(best)]) best = static_cast<int>(i);
    }
    return best;
}

FusedDecision fuse_posteriors(const Posterior& fc, const Posterior& bp) {
    FusedDecision out;
    for (int k = 0; k < kNumClasses; ++k) out.posterior[k] = 0.5 * (fc[k] + bp[k]);
    out.action = action_from_index(argmax(out.posterior));
    return out;
}

namespace {

struct Standardizer {
    Eigen::VectorXd mean;
    Eigen::VectorXd inv_std;

    static Standardizer fit(const std::vector<Eigen::VectorXd>& xs) {
        const Eigen::Index p = xs.front().size();
        Standardizer s{Eigen::VectorXd::Zero(p), Eigen::VectorXd::Ones(p)};
        for (const auto& x : xs) s.mean += x;
        s.mean /= static_cast<double>(xs.size());
        Eigen::VectorXd var = Eigen::VectorXd::Zero(p);
        for (const auto& x : xs) var += (x - s.mean).cwiseAbs2();
        var /= static_cast<double>(std::max<std::size_t>(xs.size() - 1, 1));
        for (Eigen::Index i = 0; i < p; ++i) s.inv_std(i) = var(i) > 0.0 ? 1.0 / std::sqrt(var(i)) : 1.0;
        return s;
    }

    Eigen::VectorXd apply(const Eigen::VectorXd& x) const { return (x - mean).cwiseProduct(inv_std); }
};

Posterior to_posterior(const Eigen::VectorXd& v) {
    Posterior p{};
    for (int k = 0; k < kNumClasses; ++k) p[k] = v(k);
    return p;
}

Posterior classify(const std::vector<Eigen::VectorXd>& all, const std::vector<int>& labels,
                   const std::vector<std::size_t>& train, std::size_t test, double lambda) {
    std::vector<Eigen::VectorXd> xs;
    std::vector<int> ys;
    xs.reserve(train.size());
    for (std::size_t i : train) {
        xs.push_back(all[i]);
        ys.push_back(labels[i]);
    }
    const Standardizer z = Standardizer::fit(xs);
    for (auto& x : xs) x = z.apply(x);
    const LdaModel model = lda_fit(xs, ys, lambda);
    return to_posterior(lda_posterior(model, z.apply(all[test])));
}

}  // namespace

std::vector<ClassifiedTrial> crossval_classify(std::span<const Trial> trials, double lambda, int folds,
                                               std::uint64_t seed) {
    if (folds < 2) throw EegError("crossval_classify: need at least 2 folds");
    std::vector<std::vector<std::size_t>> by_class(kNumClasses);
    for (std::size_t i = 0; i < trials.size(); ++i) {
        const int y = trials[i].label;
        if (y < 0 || y >= kNumClasses) throw EegError("crossval_classify: label out of range");
        by_class[static_cast<std::size_t>(y)].push_back(i);
    }
    for (int k = 0; k < kNumClasses; ++k) {
        if (static_cast<int>(by_class[static_cast<std::size_t>(k)].size()) < folds) {
            throw EegError("crossval_classify: class " + std::to_string(k) + " has fewer than " +
                           std::to_string(folds) + " trials");
        }
    }

    std::vector<Eigen::VectorXd> fc(trials.size()), bp(trials.size());
    std::vector<int> labels(trials.size());
    for (std::size_t i = 0; i < trials.size(); ++i) {
        fc[i] = fc_features(trials[i]);
        bp[i] = bp_features(trials[i]);
        labels[i] = trials[i].label;
    }

    Rng rng(seed);
    std::vector<int> fold_of(trials.size(), 0);
    for (auto& members : by_class) {
        std::vector<std::size_t> order = members;
        std::shuffle(order.begin(), order.end(), rng);
        for (std::size_t r = 0; r < order.size(); ++r) fold_of[order[r]] = static_cast<int>(r % static_cast<std::size_t>(folds));
    }

    std::vector<ClassifiedTrial> out(trials.size());
    for (int f = 0; f < folds; ++f) {
        std::vector<std::size_t> train, test;
        for (std::size_t i = 0; i < trials.size(); ++i) (fold_of[i] == f ? test : train).push_back(i);
        for (std::size_t i : test) {
            ClassifiedTrial& ct = out[i];
            ct.trial_index = i;
            ct.label_true = labels[i];
            ct.posterior_fc = classify(fc, labels, train, i, lambda);
            ct.posterior_bp = classify(bp, labels, train, i, lambda);
            ct.label_fc = argmax(ct.posterior_fc);
            ct.label_bp = argmax(ct.posterior_bp);
        }
    }
    std::stable_sort(out.begin(), out.end(), [](const ClassifiedTrial& a, const ClassifiedTrial& b) {
        return a.label_true < b.label_true;
    });
    return out;
}

AccuracySummary summarize(std::span<const ClassifiedTrial> classified) {
    AccuracySummary s;
    s.trials = classified.size();
    if (classified.empty()) return s;
    for (const auto& ct : classified) {
        s.fc += ct.label_fc == ct.label_true;
        s.bp += ct.label_bp == ct.label_true;
        s.fused += index_of(fuse_posteriors(ct.posterior_fc, ct.posterior_bp).action) == ct.label_true;
    }
    const double n = static_cast<double>(classified.size());
    s.fc /= n;
    s.bp /= n;
    s.fused /= n;
    return s;
}

void SyntheticConfig::validate() const {
    if (channels < 2) throw EegError("synthetic EEG needs at least 2 channels");
    if (samples < 4) throw EegError("synthetic EEG needs at least 4 samples");
    if (!(fs > 0.0)) throw EegError("synthetic EEG sampling rate must be positive");
    if (trials_per_class < 1) throw EegError("synthetic EEG needs at least one trial per class");
    if (noise_level < 0.0) throw EegError("noise level must be non-negative");
}

namespace {

// Paul Kellet's refined 1/f filter; output has roughly unit variance.
std::vector<double> pink_noise(int n, Rng& rng) {
    std::normal_distribution<double> white(0.0, 1.0);
    double b0 = 0, b1 = 0, b2 = 0, b3 = 0, b4 = 0, b5 = 0, b6 = 0;
    std::vector<double> out(static_cast<std::size_t>(n));
    constexpr int kBurnIn = 64;
    for (int i = -kBurnIn; i < n; ++i) {
        const double w = white(rng);
        b0 = 0.99886 * b0 + w * 0.0555179;
        b1 = 0.99332 * b1 + w * 0.0750759;
        b2 = 0.96900 * b2 + w * 0.1538520;
        b3 = 0.86650 * b3 + w * 0.3104856;
        b4 = 0.55000 * b4 + w * 0.5329522;
        b5 = -0.7616 * b5 - w * 0.0168980;
        const double pink = b0 + b1 + b2 + b3 + b4 + b5 + b6 + w * 0.5362;
        b6 = w * 0.115926;
        if (i >= 0) out[static_cast<std::size_t>(i)] = 0.3 * pink;
    }
    return out;
}

bool in_oscillation_subset(int channel, int cls) { return channel % kNumClasses == cls; }
bool in_coupling_group(int channel, int cls) { return (channel / kNumClasses) % kNumClasses == cls; }

}  // namespace

std::vector<Trial> gen_synthetic_eeg(const SyntheticConfig& config, Rng& rng) {
    config.validate();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const double two_pi = 2.0 * std::numbers::pi;
    const double dt = 1.0 / config.fs;

    std::vector<Trial> trials;
    trials.reserve(static_cast<std::size_t>(config.trials_per_class * kNumClasses));
    for (int rep = 0; rep < config.trials_per_class; ++rep) {
        for (int cls = 0; cls < kNumClasses; ++cls) {
            Trial t;
            t.fs = config.fs;
            t.label = cls;
            t.data = Eigen::MatrixXd::Zero(config.channels, config.samples);

            // Latent source for the class coupling group: smoothed white noise.
            std::vector<double> latent(static_cast<std::size_t>(config.samples));
            double prev = 0.0;
            for (auto& v : latent) {
                prev = 0.5 * prev + gauss(rng);
                v = prev;
            }

            for (int c = 0; c < config.channels; ++c) {
                const double f1 = 2.0 + 38.0 * unit(rng);
                const double f2 = 2.0 + 38.0 * unit(rng);
                const double ph1 = two_pi * unit(rng);
                const double ph2 = two_pi * unit(rng);
                const double amp = config.baseline_amplitude * (0.5 + unit(rng));
                const bool oscillates = in_oscillation_subset(c, cls);
                const double osc_f = config.oscillation_hz[static_cast<std::size_t>(cls)] + (unit(rng) - 0.5);
                const double osc_ph = two_pi * unit(rng);
                const double osc_amp = config.oscillation_amplitude * (0.8 + 0.4 * unit(rng));
                const bool coupled = in_coupling_group(c, cls);
                const std::vector<double> noise = pink_noise(config.samples, rng);
                for (int n = 0; n < config.samples; ++n) {
                    const double time = n * dt;
                    double x = amp * (std::sin(two_pi * f1 * time + ph1) + std::sin(two_pi * f2 * time + ph2));
                    if (oscillates) x += osc_amp * std::sin(two_pi * osc_f * time + osc_ph);
                    if (coupled) x += config.coupling_weight * latent[static_cast<std::size_t>(n)];
                    x += config.noise_level * noise[static_cast<std::size_t>(n)];
                    t.data(c, n) = x;
                }
            }
            trials.push_back(std::move(t));
        }
    }
    return trials;
}

void write_trials(std::ostream& out, std::span<const Trial> trials) {
    if (trials.empty()) throw EegError("write_trials: nothing to write");
    const int nc = trials.front().channels();
    const double fs = trials.front().fs;
    out << "channels=" << nc << " fs=" << std::setprecision(17) << fs << " trials=" << trials.size() << '\n';
    for (const auto& t : trials) {
        if (t.channels() != nc || t.fs != fs) throw EegError("write_trials: trials disagree on channels or fs");
        out << "label=" << t.label << " samples=" << t.samples() << '\n';
        for (int c = 0; c < nc; ++c) {
            for (int n = 0; n < t.samples(); ++n) {
                if (n) out << ' ';
                out << std::setprecision(17) << t.data(c, n);
            }
            out << '\n';
        }
    }
}

ParseError::ParseError(const std::string& what, std::size_t line, std::size_t column)
    : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " + what),
      line_(line),
      column_(column) {}

namespace {

class LineReader {
public:
    explicit LineReader(std::istream& in) : in_(in) {}

    // Next non-blank, non-comment line; false at end of input.
    bool next(std::string& line) {
        while (std::getline(in_, line)) {
            ++number_;
            const auto first = line.find_first_not_of(" \t\r");
            if (first == std::string::npos || line[first] == '#') continue;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            return true;
        }
        return false;
    }

    std::size_t number() const { return number_; }

private:
    std::istream& in_;
    std::size_t number_ = 0;
};

// Parses "key=value" tokens in order; returns the value strings.
std::vector<std::string> expect_keys(const std::string& line, std::size_t line_no,
                                     const std::vector<std::string>& keys) {
    std::vector<std::string> values;
    std::istringstream ss(line);
    std::string token;
    for (const auto& key : keys) {
        const auto pos = ss.tellg();
        const std::size_t col = (pos < 0 ? line.size() : static_cast<std::size_t>(pos)) + 1;
        if (!(ss >> token)) throw ParseError("missing '" + key + "=' field", line_no, col);
        const auto eq = token.find('=');
        if (eq == std::string::npos || token.substr(0, eq) != key) {
            throw ParseError("expected '" + key + "=<value>', got '" + token + "'", line_no, line.find(token) + 1);
        }
        values.push_back(token.substr(eq + 1));
    }
    if (ss >> token) throw ParseError("unexpected trailing field '" + token + "'", line_no, line.find(token) + 1);
    return values;
}

template <typename T>
T parse_number(const std::string& text, std::size_t line_no, std::size_t col, const char* what) {
    std::istringstream ss(text);
    T v{};
    char extra = 0;
    if (!(ss >> v) || (ss >> extra)) {
        throw ParseError(std::string("malformed ") + what + " '" + text + "'", line_no, col);
    }
    return v;
}

}  // namespace

std::vector<Trial> read_trials(std::istream& in) {
    LineReader reader(in);
    std::string line;
    if (!reader.next(line)) throw ParseError("empty trial file", 1, 1);
    const auto header = expect_keys(line, reader.number(), {"channels", "fs", "trials"});
    const int nc = parse_number<int>(header[0], reader.number(), 1, "channel count");
    const double fs = parse_number<double>(header[1], reader.number(), line.find("fs=") + 1, "sampling rate");
    const long n_trials = parse_number<long>(header[2], reader.number(), line.find("trials=") + 1, "trial count");
    if (nc < 2) throw ParseError("channel count must be >= 2", reader.number(), 1);
    if (!(fs > 0.0)) throw ParseError("sampling rate must be positive", reader.number(), line.find("fs=") + 1);
    if (n_trials < 0) throw ParseError("trial count must be non-negative", reader.number(), line.find("trials=") + 1);

    std::vector<Trial> trials;
    trials.reserve(static_cast<std::size_t>(n_trials));
    for (long t = 0; t < n_trials; ++t) {
        if (!reader.next(line)) {
            throw ParseError("expected " + std::to_string(n_trials) + " trials, found " + std::to_string(t),
                             reader.number() + 1, 1);
        }
        const auto th = expect_keys(line, reader.number(), {"label", "samples"});
        Trial trial;
        trial.fs = fs;
        trial.label = parse_number<int>(th[0], reader.number(), 1, "label");
        if (trial.label < 0 || trial.label >= kNumClasses) {
            throw ParseError("label must lie in 0..3", reader.number(), 1);
        }
        const int ns = parse_number<int>(th[1], reader.number(), line.find("samples=") + 1, "sample count");
        if (ns < 1) throw ParseError("sample count must be positive", reader.number(), line.find("samples=") + 1);
        trial.data.resize(nc, ns);
        for (int c = 0; c < nc; ++c) {
            if (!reader.next(line)) {
                throw ParseError("trial " + std::to_string(t) + " ends after " + std::to_string(c) + " of " +
                                     std::to_string(nc) + " channels",
                                 reader.number() + 1, 1);
            }
            std::istringstream ss(line);
            std::string tok;
            int n = 0;
            std::size_t col = 0;
            while (ss >> tok) {
                col = line.find(tok, col) + 1;
                if (n >= ns) {
                    throw ParseError("more than " + std::to_string(ns) + " samples", reader.number(), col);
                }
                const double v = parse_number<double>(tok, reader.number(), col, "sample");
                if (!std::isfinite(v)) throw ParseError("non-finite sample", reader.number(), col);
                trial.data(c, n++) = v;
                col += tok.size() - 1;
            }
            if (n != ns) {
                throw ParseError("expected " + std::to_string(ns) + " samples, found " + std::to_string(n),
                                 reader.number(), line.size() + 1);
            }
        }
        trials.push_back(std::move(trial));
    }
    if (reader.next(line)) throw ParseError("unexpected content after the last trial", reader.number(), 1);
    return trials;
}

}  // namespace eegcopilot::eeg
