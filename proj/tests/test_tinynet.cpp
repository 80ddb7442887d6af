#include <doctest.h>

#include <cmath>
#include <sstream>

#include "eegcopilot/tinynet.hpp"

using namespace eegcopilot;
using namespace eegcopilot::nn;

namespace {

// Scalar loss u . f(x) so the backward pass can be checked against central differences.
double probe_loss(const Mlp& net, const Eigen::VectorXd& x, const Eigen::VectorXd& u) {
    return u.dot(net.forward(x));
}

double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
    double diff = 0.0, na = 0.0, nb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        diff += (a[i] - b[i]) * (a[i] - b[i]);
        na += a[i] * a[i];
        nb += b[i] * b[i];
    }
    return std::sqrt(diff) / std::max({std::sqrt(na), std::sqrt(nb), 1e-12});
}

}  // namespace

TEST_CASE("initialisation is bounded by 1/sqrt(fan_in)") {
    Rng rng(4);
    const Mlp net({8, 16, 8, 1}, Activation::Relu, Activation::Linear, rng);
    CHECK(net.input_size() == 8);
    CHECK(net.output_size() == 1);
    CHECK(net.parameter_count() == 8 * 16 + 16 + 16 * 8 + 8 + 8 + 1);
    for (const auto& layer : net.layers()) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(layer.weight.cols()));
        CHECK(layer.weight.cwiseAbs().maxCoeff() <= bound);
        CHECK(layer.bias.cwiseAbs().maxCoeff() <= bound);
    }
}

TEST_CASE("batch and single forward agree") {
    Rng rng(5);
    const Mlp net({4, 16, 8, 4}, Activation::Relu, Activation::Linear, rng);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(4, 7);
    const Eigen::MatrixXd y = net.forward_batch(x);
    for (int j = 0; j < 7; ++j) CHECK((y.col(j) - net.forward(x.col(j))).norm() < 1e-14);
    CHECK_THROWS_AS(net.forward(Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("backward matches central finite differences") {
    Rng rng(6);
    for (auto out_act : {Activation::Linear, Activation::Sigmoid}) {
        Mlp net({5, 16, 8, 3}, Activation::Relu, out_act, rng);
        const Eigen::VectorXd x = Eigen::VectorXd::Random(5);
        const Eigen::VectorXd u = Eigen::VectorXd::Random(3);
        const auto g = net.backward(x, u);
        const auto analytic = flatten(g);

        auto params = net.flatten();
        std::vector<double> numeric(params.size());
        const double h = 1e-6;
        for (std::size_t i = 0; i < params.size(); ++i) {
            const double keep = params[i];
            params[i] = keep + h;
            net.assign(params);
            const double up = probe_loss(net, x, u);
            params[i] = keep - h;
            net.assign(params);
            const double down = probe_loss(net, x, u);
            params[i] = keep;
            numeric[i] = (up - down) / (2 * h);
        }
        net.assign(params);
        CHECK(relative_error(analytic, numeric) < 1e-4);

        for (int k = 0; k < 5; ++k) {
            Eigen::VectorXd xp = x, xm = x;
            xp[k] += h;
            xm[k] -= h;
            const double fd = (probe_loss(net, xp, u) - probe_loss(net, xm, u)) / (2 * h);
            CHECK(g.input(k, 0) == doctest::Approx(fd).epsilon(1e-5));
        }
    }
}

TEST_CASE("Adam reduces a quadratic fit loss") {
    Rng rng(7);
    Mlp net({2, 8, 1}, Activation::Relu, Activation::Linear, rng);
    auto adam = AdamState::for_net(net, 1e-2);
    Eigen::MatrixXd x = Eigen::MatrixXd::Random(2, 64);
    Eigen::MatrixXd y = (x.row(0) * 0.7 - x.row(1) * 0.3).eval();
    auto loss = [&] { return (net.forward_batch(x) - y).squaredNorm() / 64.0; };
    const double before = loss();
    for (int it = 0; it < 300; ++it) {
        Tape tape;
        const Eigen::MatrixXd out = net.forward_batch(x, tape);
        adam_step(net, adam, net.backward(tape, 2.0 * (out - y) / 64.0));
    }
    CHECK(loss() < 0.1 * before);
    CHECK(adam.step == 300);
}

TEST_CASE("soft update interpolates and rejects mismatched nets") {
    Rng rng(8);
    Mlp a({3, 4, 2}, Activation::Relu, Activation::Linear, rng);
    const Mlp b({3, 4, 2}, Activation::Relu, Activation::Linear, rng);
    const auto pa = a.flatten(), pb = b.flatten();
    soft_update(a, b, 0.25);
    const auto pc = a.flatten();
    for (std::size_t i = 0; i < pa.size(); ++i) CHECK(pc[i] == doctest::Approx(0.75 * pa[i] + 0.25 * pb[i]));
    Mlp c({3, 5, 2}, Activation::Relu, Activation::Linear, rng);
    CHECK_THROWS_AS(soft_update(c, b, 0.1), std::invalid_argument);
}

TEST_CASE("save and load round-trip exactly") {
    Rng rng(9);
    const Mlp net({8, 16, 8, 1}, Activation::Relu, Activation::Sigmoid, rng);
    std::stringstream ss;
    save(ss, net);
    const Mlp back = load(ss);
    CHECK(back == net);
    std::stringstream truncated(ss.str().substr(0, 20));
    CHECK_THROWS(load(truncated));
}
