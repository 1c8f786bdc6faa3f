#include "snowode/core_net.hpp"

#include <cmath>
#include <random>
#include <string>

#include "snowode/error.hpp"

namespace snowode {

namespace {

double activate(Activation a, double v, double alpha)
{
    switch (a) {
    case Activation::relu:
        return v > 0.0 ? v : 0.0;
    case Activation::elu:
        return v > 0.0 ? v : alpha * std::expm1(v);
    case Activation::identity:
        return v;
    }
    return v;
}

// Derivative evaluated at the pre-activation. ReLU'(0) = 0.
double activate_grad(Activation a, double v, double alpha)
{
    switch (a) {
    case Activation::relu:
        return v > 0.0 ? 1.0 : 0.0;
    case Activation::elu:
        return v > 0.0 ? 1.0 : alpha * std::exp(v);
    case Activation::identity:
        return 1.0;
    }
    return 1.0;
}

void check_shape(int k, int n)
{
    if (k <= 0 || n <= 0)
        throw InvalidConfiguration("predictive net needs k >= 1 and n >= 1, got k=" + std::to_string(k) +
                                   " n=" + std::to_string(n));
}

void check_input(const PredictiveNet &net, std::span<const double> x)
{
    if (static_cast<int>(x.size()) != net.k)
        throw ShapeError("expected " + std::to_string(net.k) + " inputs, got " + std::to_string(x.size()));
}

struct Activations
{
    Eigen::VectorXd z1, h1, z2, h2;
};

Activations run(const PredictiveNet &net, std::span<const double> x)
{
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), net.k);
    Activations a;
    a.z1 = net.w1 * xv + net.b1;
    a.h1 = a.z1.unaryExpr([&](double v) { return activate(net.act1, v, net.elu_alpha); });
    a.z2 = net.w2 * a.h1 + net.b2;
    a.h2 = a.z2.unaryExpr([&](double v) { return activate(net.act2, v, net.elu_alpha); });
    return a;
}

} // namespace

std::string_view to_string(Activation a)
{
    switch (a) {
    case Activation::relu:
        return "relu";
    case Activation::elu:
        return "elu";
    case Activation::identity:
        return "identity";
    }
    return "identity";
}

Activation activation_from_string(std::string_view name)
{
    if (name == "relu")
        return Activation::relu;
    if (name == "elu")
        return Activation::elu;
    if (name == "identity")
        return Activation::identity;
    throw InvalidConfiguration("unknown activation '" + std::string(name) + "'");
}

std::size_t parameter_count(int k, int n)
{
    check_shape(k, n);
    const auto kk = static_cast<std::size_t>(k);
    const auto width = kk * static_cast<std::size_t>(n);
    return (kk * width + width) + (width * kk + kk) + (kk + 1);
}

std::size_t PredictiveNet::parameter_count() const
{
    return static_cast<std::size_t>(w1.size() + b1.size() + w2.size() + b2.size() + w3.size() + 1);
}

bool PredictiveNet::operator==(const PredictiveNet &other) const
{
    return k == other.k && n == other.n && act1 == other.act1 && act2 == other.act2 &&
           elu_alpha == other.elu_alpha && w1 == other.w1 && b1 == other.b1 && w2 == other.w2 &&
           b2 == other.b2 && w3 == other.w3 && b3 == other.b3;
}

PredictiveNet zero_predictive(int k, int n, const NetInit &init)
{
    check_shape(k, n);
    PredictiveNet net;
    net.k = k;
    net.n = n;
    net.act1 = init.act1;
    net.act2 = init.act2;
    net.elu_alpha = init.elu_alpha;
    const int width = n * k;
    net.w1 = Eigen::MatrixXd::Zero(width, k);
    net.b1 = Eigen::VectorXd::Zero(width);
    net.w2 = Eigen::MatrixXd::Zero(k, width);
    net.b2 = Eigen::VectorXd::Zero(k);
    net.w3 = Eigen::VectorXd::Zero(k);
    net.b3 = 0.0;
    return net;
}

PredictiveNet init_predictive(int k, int n, std::uint64_t seed, const NetInit &init)
{
    PredictiveNet net = zero_predictive(k, n, init);
    std::mt19937_64 rng(seed);

    auto fill = [&rng](auto &m, int fan_in, int fan_out) {
        const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
        std::uniform_real_distribution<double> dist(-bound, bound);
        // Row-major draw order so the layout matches the serialized form.
        for (Eigen::Index r = 0; r < m.rows(); ++r)
            for (Eigen::Index c = 0; c < m.cols(); ++c)
                m(r, c) = dist(rng);
    };
    const int width = n * k;
    fill(net.w1, k, width);
    fill(net.w2, width, k);
    fill(net.w3, k, 1);
    return net;
}

double forward(const PredictiveNet &net, std::span<const double> x)
{
    check_input(net, x);
    const Activations a = run(net, x);
    return net.w3.dot(a.h2) + net.b3;
}

void forward_batch(const PredictiveNet &net, const Eigen::MatrixXd &x, Eigen::RowVectorXd &out)
{
    if (x.rows() != net.k)
        throw ShapeError("batch has " + std::to_string(x.rows()) + " feature rows, net expects " +
                         std::to_string(net.k));
    Eigen::MatrixXd h1 = (net.w1 * x).colwise() + net.b1;
    h1 = h1.unaryExpr([&](double v) { return activate(net.act1, v, net.elu_alpha); });
    Eigen::MatrixXd h2 = (net.w2 * h1).colwise() + net.b2;
    h2 = h2.unaryExpr([&](double v) { return activate(net.act2, v, net.elu_alpha); });
    out = (net.w3.transpose() * h2).array() + net.b3;
}

GradientSet GradientSet::zeros_like(const PredictiveNet &net)
{
    GradientSet g;
    g.w1 = Eigen::MatrixXd::Zero(net.w1.rows(), net.w1.cols());
    g.b1 = Eigen::VectorXd::Zero(net.b1.size());
    g.w2 = Eigen::MatrixXd::Zero(net.w2.rows(), net.w2.cols());
    g.b2 = Eigen::VectorXd::Zero(net.b2.size());
    g.w3 = Eigen::VectorXd::Zero(net.w3.size());
    g.b3 = 0.0;
    g.input = Eigen::VectorXd::Zero(net.k);
    return g;
}

GradientSet &GradientSet::operator+=(const GradientSet &other)
{
    w1 += other.w1;
    b1 += other.b1;
    w2 += other.w2;
    b2 += other.b2;
    w3 += other.w3;
    b3 += other.b3;
    input += other.input;
    return *this;
}

GradientSet &GradientSet::operator*=(double factor)
{
    w1 *= factor;
    b1 *= factor;
    w2 *= factor;
    b2 *= factor;
    w3 *= factor;
    b3 *= factor;
    input *= factor;
    return *this;
}

bool GradientSet::all_finite() const
{
    return w1.allFinite() && b1.allFinite() && w2.allFinite() && b2.allFinite() && w3.allFinite() &&
           std::isfinite(b3) && input.allFinite();
}

void accumulate_backward(const PredictiveNet &net, std::span<const double> x, double upstream,
                         GradientSet &grad)
{
    check_input(net, x);
    const Activations a = run(net, x);
    Eigen::Map<const Eigen::VectorXd> xv(x.data(), net.k);

    grad.b3 += upstream;
    grad.w3 += upstream * a.h2;

    Eigen::VectorXd d2 = upstream * net.w3;
    for (Eigen::Index i = 0; i < d2.size(); ++i)
        d2(i) *= activate_grad(net.act2, a.z2(i), net.elu_alpha);
    grad.b2 += d2;
    grad.w2.noalias() += d2 * a.h1.transpose();

    Eigen::VectorXd d1 = net.w2.transpose() * d2;
    for (Eigen::Index i = 0; i < d1.size(); ++i)
        d1(i) *= activate_grad(net.act1, a.z1(i), net.elu_alpha);
    grad.b1 += d1;
    grad.w1.noalias() += d1 * xv.transpose();

    grad.input.noalias() += net.w1.transpose() * d1;
}

GradientSet backward(const PredictiveNet &net, std::span<const double> x, double upstream)
{
    GradientSet g = GradientSet::zeros_like(net);
    accumulate_backward(net, x, upstream, g);
    return g;
}

namespace {

template <typename Sink>
void visit_row_major(const Eigen::MatrixXd &m, Sink &&sink)
{
    for (Eigen::Index r = 0; r < m.rows(); ++r)
        for (Eigen::Index c = 0; c < m.cols(); ++c)
            sink(m(r, c));
}

template <typename Sink>
void visit_vector(const Eigen::VectorXd &v, Sink &&sink)
{
    for (Eigen::Index i = 0; i < v.size(); ++i)
        sink(v(i));
}

} // namespace

std::vector<double> flatten(const PredictiveNet &net)
{
    std::vector<double> out;
    out.reserve(net.parameter_count());
    auto push = [&out](double v) { out.push_back(v); };
    visit_row_major(net.w1, push);
    visit_vector(net.b1, push);
    visit_row_major(net.w2, push);
    visit_vector(net.b2, push);
    visit_vector(net.w3, push);
    out.push_back(net.b3);
    return out;
}

std::vector<double> flatten(const GradientSet &grad)
{
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(grad.w1.size() + grad.b1.size() + grad.w2.size() + grad.b2.size() +
                                         grad.w3.size() + 1));
    auto push = [&out](double v) { out.push_back(v); };
    visit_row_major(grad.w1, push);
    visit_vector(grad.b1, push);
    visit_row_major(grad.w2, push);
    visit_vector(grad.b2, push);
    visit_vector(grad.w3, push);
    out.push_back(grad.b3);
    return out;
}

void unflatten(std::span<const double> flat, PredictiveNet &net)
{
    if (flat.size() != net.parameter_count())
        throw ShapeError("flat parameter vector has " + std::to_string(flat.size()) + " entries, net has " +
                         std::to_string(net.parameter_count()));
    std::size_t at = 0;
    auto next = [&]() { return flat[at++]; };
    for (Eigen::Index r = 0; r < net.w1.rows(); ++r)
        for (Eigen::Index c = 0; c < net.w1.cols(); ++c)
            net.w1(r, c) = next();
    for (Eigen::Index i = 0; i < net.b1.size(); ++i)
        net.b1(i) = next();
    for (Eigen::Index r = 0; r < net.w2.rows(); ++r)
        for (Eigen::Index c = 0; c < net.w2.cols(); ++c)
            net.w2(r, c) = next();
    for (Eigen::Index i = 0; i < net.b2.size(); ++i)
        net.b2(i) = next();
    for (Eigen::Index i = 0; i < net.w3.size(); ++i)
        net.w3(i) = next();
    net.b3 = next();
}

} // namespace snowode
