#include "doctest.h"

#include <cmath>
#include <random>

#include "snowode/core_net.hpp"
#include "snowode/error.hpp"

using namespace snowode;

namespace {

std::vector<double> random_vector(std::mt19937_64 &rng, int k, double scale = 1.0)
{
    std::uniform_real_distribution<double> u(-scale, scale);
    std::vector<double> x(static_cast<std::size_t>(k));
    for (double &v : x)
        v = u(rng);
    return x;
}

// Pre-activations of both hidden layers, to keep finite-difference probes off kinks.
double min_kink_distance(const PredictiveNet &net, const std::vector<double> &x)
{
    const Eigen::Map<const Eigen::VectorXd> xv(x.data(), net.k);
    const Eigen::VectorXd z1 = net.w1 * xv + net.b1;
    Eigen::VectorXd a1 = z1.cwiseMax(0.0);
    const Eigen::VectorXd z2 = net.w2 * a1 + net.b2;
    return std::min(z1.cwiseAbs().minCoeff(), z2.cwiseAbs().minCoeff());
}

} // namespace

TEST_CASE("parameter counts of the depth and SWE networks")
{
    CHECK(parameter_count(7, 4) == 435);
    CHECK(parameter_count(7, 5) == 540);
    CHECK(parameter_count(1, 1) == 6);
    CHECK(init_predictive(7, 4, 3).parameter_count() == 435);
    CHECK(init_predictive(7, 5, 3).parameter_count() == 540);
}

TEST_CASE("parameter count closed form over a range of shapes")
{
    for (int k = 1; k <= 10; ++k)
        for (int n = 1; n <= 8; ++n) {
            const std::size_t expected = static_cast<std::size_t>((k * n * k + n * k) + (n * k * k + k) + (k + 1));
            CHECK(parameter_count(k, n) == expected);
            CHECK(flatten(zero_predictive(k, n)).size() == expected);
        }
}

TEST_CASE("invalid shapes are rejected")
{
    CHECK_THROWS_AS(init_predictive(0, 4, 1), InvalidConfiguration);
    CHECK_THROWS_AS(init_predictive(7, 0, 1), InvalidConfiguration);
    CHECK_THROWS_AS(activation_from_string("tanh"), InvalidConfiguration);
}

TEST_CASE("initialization is deterministic and bounded")
{
    const PredictiveNet a = init_predictive(7, 4, 11), b = init_predictive(7, 4, 11), c = init_predictive(7, 4, 12);
    CHECK(a == b);
    CHECK_FALSE(a == c);
    const double l1 = std::sqrt(6.0 / (7 + 28)), l2 = std::sqrt(6.0 / (28 + 7)), l3 = std::sqrt(6.0 / (7 + 1));
    CHECK(a.w1.cwiseAbs().maxCoeff() <= l1);
    CHECK(a.w2.cwiseAbs().maxCoeff() <= l2);
    CHECK(a.w3.cwiseAbs().maxCoeff() <= l3);
    CHECK(a.b1.isZero());
    CHECK(a.b2.isZero());
    CHECK(a.b3 == 0.0);
}

TEST_CASE("output bias passes through a zero-weight net")
{
    PredictiveNet net = zero_predictive(3, 2);
    net.b3 = 0.625;
    const std::vector<double> x{1.0, -4.0, 9.0};
    CHECK(forward(net, x) == 0.625);
}

TEST_CASE("hand-computed 2x2 identity network")
{
    NetInit id{Activation::identity, Activation::identity, 1.0};
    PredictiveNet net = zero_predictive(2, 1, id);
    net.w1 << 1.0, 2.0, 3.0, 4.0;
    net.b1 << 0.5, -0.5;
    net.w2 << -1.0, 1.0, 2.0, 0.0;
    net.b2 << 0.25, 0.0;
    net.w3 << 3.0, -2.0;
    net.b3 = 1.0;
    // x = (1, 2): h1 = (5.5, 10.5); h2 = (5.25, 11); p = 15.75 - 22 + 1
    const std::vector<double> x{1.0, 2.0};
    CHECK(forward(net, x) == doctest::Approx(-5.25).epsilon(1e-15));
}

TEST_CASE("ReLU then ELU on a hand-computed case")
{
    PredictiveNet net = zero_predictive(1, 2);
    net.w1 << 1.0, -1.0;
    net.w2 << 1.0, 1.0;
    net.b2 << -3.0;
    net.w3 << 2.0;
    // x = 2: h1 = relu(2, -2) = (2, 0); z2 = -1; elu = e^-1 - 1
    const std::vector<double> x{2.0};
    CHECK(forward(net, x) == doctest::Approx(2.0 * (std::exp(-1.0) - 1.0)).epsilon(1e-15));
}

TEST_CASE("forward is pure and rejects wrong lengths")
{
    const PredictiveNet net = init_predictive(7, 4, 5);
    std::mt19937_64 rng(1);
    const auto x = random_vector(rng, 7);
    CHECK(forward(net, x) == forward(net, x));
    const std::vector<double> short_x(6, 0.0);
    CHECK_THROWS_AS(forward(net, short_x), ShapeError);
}

TEST_CASE("batched forward matches per-column forward")
{
    const PredictiveNet net = init_predictive(7, 4, 9);
    std::mt19937_64 rng(2);
    Eigen::MatrixXd x(7, 50);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const auto v = random_vector(rng, 7, 3.0);
        for (int i = 0; i < 7; ++i)
            x(i, j) = v[static_cast<std::size_t>(i)];
    }
    Eigen::RowVectorXd out;
    forward_batch(net, x, out);
    REQUIRE(out.size() == 50);
    for (Eigen::Index j = 0; j < x.cols(); ++j) {
        const std::span<const double> col(x.col(j).data(), 7);
        CHECK(out[j] == doctest::Approx(forward(net, col)).epsilon(1e-13));
    }
}

TEST_CASE("backward agrees with central differences")
{
    std::mt19937_64 rng(42);
    const double h = 1e-5;
    double worst = 0.0;
    int checked = 0;
    for (int trial = 0; trial < 100; ++trial) {
        PredictiveNet net = init_predictive(7, 4, static_cast<std::uint64_t>(trial) + 100);
        std::normal_distribution<double> g(0.0, 0.1);
        for (Eigen::Index i = 0; i < net.b1.size(); ++i)
            net.b1[i] = g(rng);
        for (Eigen::Index i = 0; i < net.b2.size(); ++i)
            net.b2[i] = g(rng);
        auto x = random_vector(rng, 7, 2.0);
        if (min_kink_distance(net, x) < 1e-3)
            continue;
        const double upstream = 1.7;
        const GradientSet grad = backward(net, x, upstream);
        const std::vector<double> analytic = flatten(grad);
        std::vector<double> theta = flatten(net);
        for (std::size_t i = 0; i < theta.size(); ++i) {
            PredictiveNet plus = net, minus = net;
            std::vector<double> tp = theta, tm = theta;
            tp[i] += h;
            tm[i] -= h;
            unflatten(tp, plus);
            unflatten(tm, minus);
            const double fd = upstream * (forward(plus, x) - forward(minus, x)) / (2.0 * h);
            const double err = std::abs(fd - analytic[i]) / std::max(1e-6, std::max(std::abs(fd), std::abs(analytic[i])));
            worst = std::max(worst, err);
        }
        for (int j = 0; j < 7; ++j) {
            auto xp = x, xm = x;
            xp[static_cast<std::size_t>(j)] += h;
            xm[static_cast<std::size_t>(j)] -= h;
            const double fd = upstream * (forward(net, xp) - forward(net, xm)) / (2.0 * h);
            const double err = std::abs(fd - grad.input[j]) / std::max(1e-6, std::abs(fd));
            worst = std::max(worst, err);
        }
        ++checked;
    }
    CHECK(checked >= 80);
    CHECK(worst < 1e-4);
}

TEST_CASE("backward edge cases")
{
    const PredictiveNet net = init_predictive(7, 4, 3);
    std::mt19937_64 rng(4);
    const auto x = random_vector(rng, 7);
    const GradientSet zero = backward(net, x, 0.0);
    for (double v : flatten(zero))
        CHECK(v == 0.0);
    CHECK(backward(net, x, 2.5).b3 == 2.5);

    GradientSet acc = GradientSet::zeros_like(net);
    accumulate_backward(net, x, 1.0, acc);
    accumulate_backward(net, x, 2.0, acc);
    const auto single = flatten(backward(net, x, 3.0));
    const auto summed = flatten(acc);
    for (std::size_t i = 0; i < single.size(); ++i)
        CHECK(summed[i] == doctest::Approx(single[i]).epsilon(1e-14));
}

TEST_CASE("flatten and unflatten round trip")
{
    const PredictiveNet net = init_predictive(5, 3, 8);
    PredictiveNet copy = zero_predictive(5, 3);
    unflatten(flatten(net), copy);
    CHECK(copy == net);
    std::vector<double> wrong(flatten(net).size() + 1, 0.0);
    CHECK_THROWS_AS(unflatten(wrong, copy), ShapeError);
}
