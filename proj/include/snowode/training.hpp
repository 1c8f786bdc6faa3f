#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "snowode/model.hpp"

namespace snowode {

/// Training hyperparameters. Defaults follow the depth network's selected
/// configuration; learning rate and RMSProp constants are not tuned values.
struct Hyperparams
{
    int window_days = 1;            // N: moving-window length for averaging
    int width_multiplier = 4;       // n: mixing-layer width = n * k
    double error_exponent = 2.0;    // n1
    double magnitude_exponent = 4.0; // n2
    int batch_size = 64;
    int epochs = 100;
    double learning_rate = 1e-3;
    double rmsprop_rho = 0.9;
    double rmsprop_epsilon = 1e-8;
    std::uint64_t seed = 0;

    void validate() const;
    bool operator==(const Hyperparams &) const = default;
};

/// Regression rows: raw physical features plus the physical tendency target.
struct TrainingSet
{
    int k = snow_feature_count;
    std::vector<double> features; // row-major, k per row
    std::vector<double> targets;  // m/s
    std::vector<std::string> sites;

    std::size_t size() const { return targets.size(); }
    bool empty() const { return targets.empty(); }
    std::span<const double> row(std::size_t i) const
    {
        return {features.data() + i * static_cast<std::size_t>(k), static_cast<std::size_t>(k)};
    }
    void add(std::span<const double> x, double target, const std::string &site);
    void append(const TrainingSet &other);
};

struct ScalingConstants
{
    std::vector<double> scale_x; // per-feature standard deviation
    double scale_y = 1.0;        // max |target|
};

/// Population standard deviation per feature and absolute-maximum target.
/// Degenerate (zero) scales fall back to 1.
ScalingConstants compute_scaling(const TrainingSet &data);

/// L = (1/N) sum (1 + |y|^n2) |y - y_hat|^n1
double extreme_weighted_loss(std::span<const double> y_hat, std::span<const double> y, double n1, double n2);

/// dL_i/dy_hat_i for one term (before the 1/N factor). Zero residual gives zero.
double extreme_weighted_loss_grad(double y_hat, double y, double n1, double n2);

struct RmsPropState
{
    std::vector<double> mean_square;
    double rho = 0.9;
    double epsilon = 1e-8;
};

/// v <- rho v + (1 - rho) g^2;  theta <- theta - lr g / (sqrt(v) + eps)
void rmsprop_step(std::span<double> params, std::span<const double> grads, RmsPropState &state,
                  double learning_rate);

enum class ConstraintTraining {
    active,  // thresholds inside every forward/backward pass
    post_hoc // trained unconstrained; thresholds applied only at inference
};

struct TrainOptions
{
    double dt = 86400.0;
    StateVariable target = StateVariable::depth;
    ConstraintTraining constraints = ConstraintTraining::active;
    int checkpoint_every = 10;
    NetInit init{};
    std::optional<ScalingConstants> scaling; // computed from the data when absent
};

struct Checkpoint
{
    int epoch = 0;
    PredictiveNet net;
    double train_loss = 0.0;
};

struct TrainingRun
{
    ConstrainedModel model;
    std::vector<double> epoch_loss;
    std::vector<Checkpoint> checkpoints;

    ConstrainedModel model_at(const Checkpoint &c) const;
};

/// Mean loss of a model over a data set in scaled target space.
double evaluate_loss(const ConstrainedModel &model, const TrainingSet &data, const Hyperparams &hp,
                     ConstraintTraining constraints = ConstraintTraining::active);

/// Gradient of the batch loss w.r.t. the net parameters.
GradientSet batch_gradient(const ConstrainedModel &model, const TrainingSet &data,
                           std::span<const std::size_t> rows, const Hyperparams &hp,
                           ConstraintTraining constraints, double *loss_out = nullptr);

TrainingRun train(const TrainingSet &data, const Hyperparams &hp, const ThresholdSpec &spec,
                  const TrainOptions &options = {});

} // namespace snowode
