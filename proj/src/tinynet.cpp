#include "eegcopilot/tinynet.hpp"

#include <bit>
#include <cmath>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <string>

namespace eegcopilot::nn {

namespace {

Eigen::MatrixXd activate(const Eigen::MatrixXd& z, Activation act) {
    switch (act) {
        case Activation::Linear: return z;
        case Activation::Relu: return z.cwiseMax(0.0);
        case Activation::Sigmoid: return (1.0 / (1.0 + (-z.array()).exp())).matrix();
    }
    return z;
}

// Derivative expressed through the activated output y.
Eigen::MatrixXd activation_grad(const Eigen::MatrixXd& y, Activation act) {
    switch (act) {
        case Activation::Linear: return Eigen::MatrixXd::Ones(y.rows(), y.cols());
        case Activation::Relu: return (y.array() > 0.0).cast<double>().matrix();
        case Activation::Sigmoid: return (y.array() * (1.0 - y.array())).matrix();
    }
    return Eigen::MatrixXd::Ones(y.rows(), y.cols());
}

void check_sizes(const std::vector<int>& sizes) {
    if (sizes.size() < 2) throw std::invalid_argument("an Mlp needs at least input and output sizes");
    for (int s : sizes) {
        if (s <= 0) throw std::invalid_argument("layer sizes must be positive");
    }
}

}  // namespace

Mlp::Mlp(const std::vector<int>& sizes, Activation hidden, Activation output, Rng& rng) {
    check_sizes(sizes);
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        const int fan_in = sizes[l];
        const int fan_out = sizes[l + 1];
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        std::uniform_real_distribution<double> init(-bound, bound);
        Layer layer;
        layer.weight.resize(fan_out, fan_in);
        layer.bias.resize(fan_out);
        for (int r = 0; r < fan_out; ++r) {
            for (int c = 0; c < fan_in; ++c) layer.weight(r, c) = init(rng);
        }
        for (int r = 0; r < fan_out; ++r) layer.bias(r) = init(rng);
        layer.activation = (l + 2 == sizes.size()) ? output : hidden;
        layers_.push_back(std::move(layer));
    }
}

Mlp Mlp::zeros(const std::vector<int>& sizes, Activation hidden, Activation output) {
    check_sizes(sizes);
    Mlp net;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) {
        Layer layer;
        layer.weight = Eigen::MatrixXd::Zero(sizes[l + 1], sizes[l]);
        layer.bias = Eigen::VectorXd::Zero(sizes[l + 1]);
        layer.activation = (l + 2 == sizes.size()) ? output : hidden;
        net.layers_.push_back(std::move(layer));
    }
    return net;
}

int Mlp::input_size() const { return layers_.empty() ? 0 : static_cast<int>(layers_.front().weight.cols()); }
int Mlp::output_size() const { return layers_.empty() ? 0 : static_cast<int>(layers_.back().weight.rows()); }

std::vector<int> Mlp::sizes() const {
    std::vector<int> s;
    if (layers_.empty()) return s;
    s.push_back(input_size());
    for (const auto& layer : layers_) s.push_back(static_cast<int>(layer.weight.rows()));
    return s;
}

std::size_t Mlp::parameter_count() const {
    std::size_t n = 0;
    for (const auto& layer : layers_) n += layer.weight.size() + layer.bias.size();
    return n;
}

Activation Mlp::hidden_activation() const {
    return layers_.size() > 1 ? layers_.front().activation : Activation::Relu;
}
Activation Mlp::output_activation() const {
    return layers_.empty() ? Activation::Linear : layers_.back().activation;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const {
    if (input.size() != input_size()) {
        throw std::invalid_argument("Mlp::forward: input has " + std::to_string(input.size()) +
                                    " entries, network expects " + std::to_string(input_size()));
    }
    Eigen::VectorXd x = input;
    for (const auto& layer : layers_) {
        Eigen::VectorXd z = layer.weight * x + layer.bias;
        x = activate(z, layer.activation);
    }
    return x;
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& inputs) const {
    Tape scratch;
    return forward_batch(inputs, scratch);
}

Eigen::MatrixXd Mlp::forward_batch(const Eigen::MatrixXd& inputs, Tape& tape) const {
    if (inputs.rows() != input_size()) {
        throw std::invalid_argument("Mlp::forward_batch: input has " + std::to_string(inputs.rows()) +
                                    " rows, network expects " + std::to_string(input_size()));
    }
    tape.inputs.clear();
    tape.outputs.clear();
    Eigen::MatrixXd x = inputs;
    for (const auto& layer : layers_) {
        tape.inputs.push_back(x);
        Eigen::MatrixXd z = layer.weight * x;
        z.colwise() += layer.bias;
        x = activate(z, layer.activation);
        tape.outputs.push_back(x);
    }
    return x;
}

Gradients Mlp::backward(const Tape& tape, const Eigen::MatrixXd& upstream) const {
    if (tape.outputs.size() != layers_.size()) {
        throw std::invalid_argument("Mlp::backward: tape does not belong to this network");
    }
    if (upstream.rows() != output_size() || upstream.cols() != tape.outputs.back().cols()) {
        throw std::invalid_argument("Mlp::backward: upstream gradient has wrong shape");
    }
    Gradients g;
    g.weight.resize(layers_.size());
    g.bias.resize(layers_.size());
    Eigen::MatrixXd delta = upstream;
    for (std::size_t i = layers_.size(); i-- > 0;) {
        const Layer& layer = layers_[i];
        delta = delta.cwiseProduct(activation_grad(tape.outputs[i], layer.activation));
        g.weight[i] = delta * tape.inputs[i].transpose();
        g.bias[i] = delta.rowwise().sum();
        delta = layer.weight.transpose() * delta;
    }
    g.input = std::move(delta);
    return g;
}

Gradients Mlp::backward(const Eigen::VectorXd& input, const Eigen::VectorXd& upstream) const {
    Tape tape;
    forward_batch(input, tape);
    return backward(tape, upstream);
}

bool Mlp::all_finite() const {
    for (const auto& layer : layers_) {
        if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
    }
    return true;
}

bool Mlp::same_architecture(const Mlp& other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
        const auto& a = layers_[i];
        const auto& b = other.layers_[i];
        if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() ||
            a.activation != b.activation) {
            return false;
        }
    }
    return true;
}

std::vector<double> Mlp::flatten() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const auto& layer : layers_) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) flat.push_back(layer.weight(r, c));
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) flat.push_back(layer.bias(r));
    }
    return flat;
}

void Mlp::assign(std::span<const double> flat) {
    if (flat.size() != parameter_count()) throw std::invalid_argument("Mlp::assign: wrong parameter count");
    std::size_t k = 0;
    for (auto& layer : layers_) {
        for (Eigen::Index r = 0; r < layer.weight.rows(); ++r) {
            for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = flat[k++];
        }
        for (Eigen::Index r = 0; r < layer.bias.size(); ++r) layer.bias(r) = flat[k++];
    }
}

bool operator==(const Mlp& a, const Mlp& b) {
    if (!a.same_architecture(b)) return false;
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
        if (a.layers_[i].weight != b.layers_[i].weight || a.layers_[i].bias != b.layers_[i].bias) {
            return false;
        }
    }
    return true;
}

Gradients zero_gradients_like(const Mlp& net) {
    Gradients g;
    for (const auto& layer : net.layers()) {
        g.weight.push_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
        g.bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
    }
    g.input = Eigen::MatrixXd::Zero(net.input_size(), 1);
    return g;
}

std::vector<double> flatten(const Gradients& g) {
    std::vector<double> flat;
    for (std::size_t i = 0; i < g.weight.size(); ++i) {
        for (Eigen::Index r = 0; r < g.weight[i].rows(); ++r) {
            for (Eigen::Index c = 0; c < g.weight[i].cols(); ++c) flat.push_back(g.weight[i](r, c));
        }
        for (Eigen::Index r = 0; r < g.bias[i].size(); ++r) flat.push_back(g.bias[i](r));
    }
    return flat;
}

AdamState AdamState::for_net(const Mlp& net, double learning_rate) {
    AdamState s;
    s.learning_rate = learning_rate;
    for (const auto& layer : net.layers()) {
        s.m_weight.push_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
        s.v_weight.push_back(Eigen::MatrixXd::Zero(layer.weight.rows(), layer.weight.cols()));
        s.m_bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
        s.v_bias.push_back(Eigen::VectorXd::Zero(layer.bias.size()));
    }
    return s;
}

namespace {

template <typename Param>
void adam_update(Param& p, Param& m, Param& v, const Param& g, const AdamState& s, double c1, double c2) {
    m = s.beta1 * m + (1.0 - s.beta1) * g;
    v = s.beta2 * v + (1.0 - s.beta2) * g.cwiseProduct(g);
    p.array() -= s.learning_rate * (m.array() / c1) / ((v.array() / c2).sqrt() + s.epsilon);
}

}  // namespace

void adam_step(Mlp& net, AdamState& adam, const Gradients& grads) {
    auto& layers = net.layers();
    if (grads.weight.size() != layers.size() || adam.m_weight.size() != layers.size()) {
        throw std::invalid_argument("adam_step: gradient/optimizer shape does not match network");
    }
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (grads.weight[i].rows() != layers[i].weight.rows() ||
            grads.weight[i].cols() != layers[i].weight.cols() ||
            grads.bias[i].size() != layers[i].bias.size()) {
            throw std::invalid_argument("adam_step: gradient shape mismatch at layer " + std::to_string(i));
        }
    }
    ++adam.step;
    const double c1 = 1.0 - std::pow(adam.beta1, static_cast<double>(adam.step));
    const double c2 = 1.0 - std::pow(adam.beta2, static_cast<double>(adam.step));
    for (std::size_t i = 0; i < layers.size(); ++i) {
        adam_update(layers[i].weight, adam.m_weight[i], adam.v_weight[i], grads.weight[i], adam, c1, c2);
        adam_update(layers[i].bias, adam.m_bias[i], adam.v_bias[i], grads.bias[i], adam, c1, c2);
    }
}

void soft_update(Mlp& target, const Mlp& source, double tau) {
    if (!target.same_architecture(source)) throw std::invalid_argument("soft_update: architecture mismatch");
    auto& t = target.layers();
    const auto& s = source.layers();
    for (std::size_t i = 0; i < t.size(); ++i) {
        t[i].weight = tau * s[i].weight + (1.0 - tau) * t[i].weight;
        t[i].bias = tau * s[i].bias + (1.0 - tau) * t[i].bias;
    }
}

namespace {

constexpr char kMagic[4] = {'T', 'N', 'E', 'T'};
constexpr std::uint32_t kVersion = 1;

void put_u32(std::ostream& out, std::uint32_t v) {
    char b[4];
    for (int i = 0; i < 4; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, 4);
}

void put_f64(std::ostream& out, double d) {
    const auto v = std::bit_cast<std::uint64_t>(d);
    char b[8];
    for (int i = 0; i < 8; ++i) b[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out.write(b, 8);
}

std::uint32_t get_u32(std::istream& in) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error("tinynet: truncated stream");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
}

double get_f64(std::istream& in) {
    unsigned char b[8];
    if (!in.read(reinterpret_cast<char*>(b), 8)) throw std::runtime_error("tinynet: truncated stream");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return std::bit_cast<double>(v);
}

Activation activation_from_byte(int b) {
    if (b < 0 || b > 2) throw std::runtime_error("tinynet: unknown activation tag " + std::to_string(b));
    return static_cast<Activation>(b);
}

}  // namespace

void save(std::ostream& out, const Mlp& net) {
    out.write(kMagic, 4);
    put_u32(out, kVersion);
    const auto sizes = net.sizes();
    put_u32(out, static_cast<std::uint32_t>(sizes.size()));
    for (int s : sizes) put_u32(out, static_cast<std::uint32_t>(s));
    out.put(static_cast<char>(net.hidden_activation()));
    out.put(static_cast<char>(net.output_activation()));
    for (double v : net.flatten()) put_f64(out, v);
}

Mlp load(std::istream& in) {
    char magic[4];
    if (!in.read(magic, 4) || std::string(magic, 4) != std::string(kMagic, 4)) {
        throw std::runtime_error("tinynet: bad magic");
    }
    if (get_u32(in) != kVersion) throw std::runtime_error("tinynet: unsupported version");
    const std::uint32_t n = get_u32(in);
    if (n < 2 || n > 64) throw std::runtime_error("tinynet: implausible layer count");
    std::vector<int> sizes;
    for (std::uint32_t i = 0; i < n; ++i) sizes.push_back(static_cast<int>(get_u32(in)));
    const int hidden = in.get();
    const int output = in.get();
    if (!in) throw std::runtime_error("tinynet: truncated stream");
    Mlp net = Mlp::zeros(sizes, activation_from_byte(hidden), activation_from_byte(output));
    std::vector<double> flat(net.parameter_count());
    for (double& v : flat) v = get_f64(in);
    net.assign(flat);
    return net;
}

}  // namespace eegcopilot::nn
