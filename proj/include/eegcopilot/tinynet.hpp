#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "eegcopilot/gridworld.hpp"

namespace eegcopilot::nn {

enum class Activation : std::uint8_t { Linear = 0, Relu = 1, Sigmoid = 2 };

struct Layer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;
    Activation activation = Activation::Linear;
};

/// Per-layer parameter gradients plus the gradient with respect to the input.
struct Gradients {
    std::vector<Eigen::MatrixXd> weight;
    std::vector<Eigen::VectorXd> bias;
    Eigen::MatrixXd input;  // in x batch
};

/// Values cached by a forward pass for the matching backward pass.
struct Tape {
    std::vector<Eigen::MatrixXd> inputs;  // input to layer l, one column per sample
    std::vector<Eigen::MatrixXd> outputs;  // activated output of layer l
};

/// Dense feedforward network. Columns of batch matrices are samples.
class Mlp {
public:
    Mlp() = default;

    /// Uniform initialisation in +-1/sqrt(fan_in).
    Mlp(const std::vector<int>& sizes, Activation hidden, Activation output, Rng& rng);

    /// All weights and biases zero.
    static Mlp zeros(const std::vector<int>& sizes, Activation hidden, Activation output);

    int input_size() const;
    int output_size() const;
    std::vector<int> sizes() const;
    std::size_t parameter_count() const;

    std::vector<Layer>& layers() { return layers_; }
    const std::vector<Layer>& layers() const { return layers_; }

    Eigen::VectorXd forward(const Eigen::VectorXd& input) const;
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs) const;
    Eigen::MatrixXd forward_batch(const Eigen::MatrixXd& inputs, Tape& tape) const;

    /// Backpropagates `upstream` (dL/doutput, out x batch). Parameter
    /// gradients are summed over the batch.
    Gradients backward(const Tape& tape, const Eigen::MatrixXd& upstream) const;
    Gradients backward(const Eigen::VectorXd& input, const Eigen::VectorXd& upstream) const;

    bool all_finite() const;
    bool same_architecture(const Mlp& other) const;

    /// Flat parameter view used by tests: weights row-major, then bias, per layer.
    std::vector<double> flatten() const;
    void assign(std::span<const double> flat);

    Activation hidden_activation() const;
    Activation output_activation() const;

    friend bool operator==(const Mlp& a, const Mlp& b);

private:
    std::vector<Layer> layers_;
};

Gradients zero_gradients_like(const Mlp& net);
std::vector<double> flatten(const Gradients& g);

struct AdamState {
    double learning_rate = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    std::int64_t step = 0;
    std::vector<Eigen::MatrixXd> m_weight, v_weight;
    std::vector<Eigen::VectorXd> m_bias, v_bias;

    static AdamState for_net(const Mlp& net, double learning_rate = 3e-4);
};

void adam_step(Mlp& net, AdamState& adam, const Gradients& grads);

/// target <- tau * source + (1 - tau) * target
void soft_update(Mlp& target, const Mlp& source, double tau);

/// Binary layout, all integers and floats little-endian:
///   "TNET" | u32 version=1 | u32 n_sizes | u32 sizes[n_sizes] |
///   u8 hidden activation | u8 output activation |
///   per layer: f64 weight[out*in] (row-major), f64 bias[out]
void save(std::ostream& out, const Mlp& net);
Mlp load(std::istream& in);

}  // namespace eegcopilot::nn
