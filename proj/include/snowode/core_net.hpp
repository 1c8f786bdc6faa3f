#pragma once

#include <cstdint>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace snowode {

enum class Activation { relu, elu, identity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

/// Trainable k -> n*k -> k -> 1 feed-forward stack.
///
/// The first (mixing) layer widens the k inputs by the multiplier n, the
/// second contracts back to k, and a linear read-out produces the raw
/// prediction p. Inputs are expected to be pre-scaled.
struct PredictiveNet
{
    int k = 0;
    int n = 0;
    Activation act1 = Activation::relu;
    Activation act2 = Activation::elu;
    double elu_alpha = 1.0;

    Eigen::MatrixXd w1; // (n*k) x k
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2; // k x (n*k)
    Eigen::VectorXd b2;
    Eigen::VectorXd w3; // k
    double b3 = 0.0;

    std::size_t parameter_count() const;

    bool operator==(const PredictiveNet &other) const;
};

/// Closed-form trainable parameter count for a (k, n) stack.
std::size_t parameter_count(int k, int n);

struct NetInit
{
    Activation act1 = Activation::relu;
    Activation act2 = Activation::elu;
    double elu_alpha = 1.0;
};

/// Glorot-uniform weights, zero biases. Deterministic in `seed`.
PredictiveNet init_predictive(int k, int n, std::uint64_t seed, const NetInit &init = {});

/// Zero-weight net of the given shape (useful as an accumulator template).
PredictiveNet zero_predictive(int k, int n, const NetInit &init = {});

double forward(const PredictiveNet &net, std::span<const double> x);

/// Forward pass over a batch stored column-wise (k x N); writes N predictions.
void forward_batch(const PredictiveNet &net, const Eigen::MatrixXd &x, Eigen::RowVectorXd &out);

/// Per-parameter gradients of p (scaled by an upstream factor), plus dp/dx.
struct GradientSet
{
    Eigen::MatrixXd w1;
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2;
    Eigen::VectorXd b2;
    Eigen::VectorXd w3;
    double b3 = 0.0;
    Eigen::VectorXd input;

    static GradientSet zeros_like(const PredictiveNet &net);

    GradientSet &operator+=(const GradientSet &other);
    GradientSet &operator*=(double factor);
    bool all_finite() const;
};

GradientSet backward(const PredictiveNet &net, std::span<const double> x, double upstream);

/// Accumulating variant: adds upstream * dp/dtheta into `grad` without allocating a new set.
void accumulate_backward(const PredictiveNet &net, std::span<const double> x, double upstream,
                         GradientSet &grad);

// Flat views in a fixed order: w1 (row-major), b1, w2 (row-major), b2, w3, b3.
std::vector<double> flatten(const PredictiveNet &net);
std::vector<double> flatten(const GradientSet &grad);
void unflatten(std::span<const double> flat, PredictiveNet &net);

} // namespace snowode
