#include "snowode/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "snowode/error.hpp"

namespace snowode {

void Hyperparams::validate() const
{
    if (window_days < 1)
        throw InvalidConfiguration("window_days (N) must be >= 1");
    if (width_multiplier < 1)
        throw InvalidConfiguration("width_multiplier (n) must be >= 1");
    if (!(error_exponent > 0.0))
        throw InvalidConfiguration("error_exponent (n1) must be > 0");
    if (!(magnitude_exponent >= 0.0))
        throw InvalidConfiguration("magnitude_exponent (n2) must be >= 0");
    if (batch_size < 1)
        throw InvalidConfiguration("batch_size must be >= 1");
    if (epochs < 1)
        throw InvalidConfiguration("epochs must be >= 1");
    if (!(learning_rate > 0.0))
        throw InvalidConfiguration("learning_rate must be > 0");
    if (!(rmsprop_rho >= 0.0 && rmsprop_rho < 1.0))
        throw InvalidConfiguration("rmsprop_rho must be in [0, 1)");
    if (!(rmsprop_epsilon > 0.0))
        throw InvalidConfiguration("rmsprop_epsilon must be > 0");
}

void TrainingSet::add(std::span<const double> x, double target, const std::string &site)
{
    if (static_cast<int>(x.size()) != k)
        throw ShapeError("training row has " + std::to_string(x.size()) + " features, expected " +
                         std::to_string(k));
    if (!std::isfinite(target) || !std::all_of(x.begin(), x.end(), [](double v) { return std::isfinite(v); }))
        throw DataError("training row from site '" + site + "' has a non-finite value");
    features.insert(features.end(), x.begin(), x.end());
    targets.push_back(target);
    sites.push_back(site);
}

void TrainingSet::append(const TrainingSet &other)
{
    if (other.k != k)
        throw ShapeError("cannot append training sets with different feature counts");
    features.insert(features.end(), other.features.begin(), other.features.end());
    targets.insert(targets.end(), other.targets.begin(), other.targets.end());
    sites.insert(sites.end(), other.sites.begin(), other.sites.end());
}

ScalingConstants compute_scaling(const TrainingSet &data)
{
    if (data.empty())
        throw DataError("cannot compute scaling constants from an empty training set");
    const auto k = static_cast<std::size_t>(data.k);
    const double n = static_cast<double>(data.size());
    ScalingConstants s;
    s.scale_x.assign(k, 1.0);
    for (std::size_t j = 0; j < k; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i)
            mean += data.row(i)[j];
        mean /= n;
        double var = 0.0;
        for (std::size_t i = 0; i < data.size(); ++i) {
            const double d = data.row(i)[j] - mean;
            var += d * d;
        }
        const double sd = std::sqrt(var / n);
        s.scale_x[j] = sd > 0.0 && std::isfinite(sd) ? sd : 1.0;
    }
    double ymax = 0.0;
    for (double y : data.targets)
        ymax = std::max(ymax, std::abs(y));
    s.scale_y = ymax > 0.0 ? ymax : 1.0;
    return s;
}

double extreme_weighted_loss(std::span<const double> y_hat, std::span<const double> y, double n1, double n2)
{
    if (y_hat.size() != y.size())
        throw ShapeError("loss inputs differ in length: " + std::to_string(y_hat.size()) + " vs " +
                         std::to_string(y.size()));
    if (y.empty())
        return 0.0;
    double total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double w = 1.0 + std::pow(std::abs(y[i]), n2);
        total += w * std::pow(std::abs(y[i] - y_hat[i]), n1);
    }
    return total / static_cast<double>(y.size());
}

double extreme_weighted_loss_grad(double y_hat, double y, double n1, double n2)
{
    const double r = y_hat - y;
    if (r == 0.0)
        return 0.0;
    const double w = 1.0 + std::pow(std::abs(y), n2);
    const double sign = r > 0.0 ? 1.0 : -1.0;
    return w * n1 * std::pow(std::abs(r), n1 - 1.0) * sign;
}

void rmsprop_step(std::span<double> params, std::span<const double> grads, RmsPropState &state,
                  double learning_rate)
{
    if (params.size() != grads.size())
        throw ShapeError("parameter and gradient vectors differ in length");
    if (state.mean_square.empty())
        state.mean_square.assign(params.size(), 0.0);
    if (state.mean_square.size() != params.size())
        throw ShapeError("optimizer state does not match parameter count");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const double g = grads[i];
        double &v = state.mean_square[i];
        v = state.rho * v + (1.0 - state.rho) * g * g;
        params[i] -= learning_rate * g / (std::sqrt(v) + state.epsilon);
    }
}

namespace {

// Scaled prediction and d(y_hat)/d(net output) for one row.
struct ScaledOutput
{
    double y_hat;
    double d_output;
};

ScaledOutput scaled_output(const ConstrainedModel &model, std::span<const double> raw,
                           std::span<const double> scaled, ConstraintTraining constraints)
{
    const double o = forward(model.net(), scaled);
    if (constraints == ConstraintTraining::post_hoc)
        return {o, 1.0};
    const RateDetail d = model.constrain(o * model.scale_y(), raw);
    return {d.rate / model.scale_y(), d.d_rate_d_p};
}

} // namespace

double evaluate_loss(const ConstrainedModel &model, const TrainingSet &data, const Hyperparams &hp,
                     ConstraintTraining constraints)
{
    std::vector<double> y_hat(data.size());
    std::vector<double> y(data.size());
    std::vector<double> scaled(static_cast<std::size_t>(data.k));
    for (std::size_t i = 0; i < data.size(); ++i) {
        model.scale_features(data.row(i), scaled);
        y_hat[i] = scaled_output(model, data.row(i), scaled, constraints).y_hat;
        y[i] = data.targets[i] / model.scale_y();
    }
    return extreme_weighted_loss(y_hat, y, hp.error_exponent, hp.magnitude_exponent);
}

GradientSet batch_gradient(const ConstrainedModel &model, const TrainingSet &data,
                           std::span<const std::size_t> rows, const Hyperparams &hp,
                           ConstraintTraining constraints, double *loss_out)
{
    GradientSet grad = GradientSet::zeros_like(model.net());
    std::vector<double> scaled(static_cast<std::size_t>(data.k));
    const double inv_n = rows.empty() ? 0.0 : 1.0 / static_cast<double>(rows.size());
    double loss = 0.0;
    for (std::size_t r : rows) {
        const auto raw = data.row(r);
        model.scale_features(raw, scaled);
        const ScaledOutput out = scaled_output(model, raw, scaled, constraints);
        const double y = data.targets[r] / model.scale_y();
        loss += (1.0 + std::pow(std::abs(y), hp.magnitude_exponent)) *
                std::pow(std::abs(y - out.y_hat), hp.error_exponent);
        const double upstream =
            inv_n * extreme_weighted_loss_grad(out.y_hat, y, hp.error_exponent, hp.magnitude_exponent) *
            out.d_output;
        if (upstream != 0.0)
            accumulate_backward(model.net(), scaled, upstream, grad);
    }
    if (loss_out)
        *loss_out = loss * inv_n;
    return grad;
}

ConstrainedModel TrainingRun::model_at(const Checkpoint &c) const
{
    return ConstrainedModel(c.net, model.spec(), model.scale_x(), model.scale_y(), model.dt(), model.target());
}

TrainingRun train(const TrainingSet &data, const Hyperparams &hp, const ThresholdSpec &spec,
                  const TrainOptions &options)
{
    hp.validate();
    if (data.empty())
        throw DataError("training set is empty");
    const ScalingConstants scaling = options.scaling ? *options.scaling : compute_scaling(data);

    TrainingRun run{ConstrainedModel(init_predictive(data.k, hp.width_multiplier, hp.seed, options.init), spec,
                                     scaling.scale_x, scaling.scale_y, options.dt, options.target),
                    {},
                    {}};

    RmsPropState opt;
    opt.rho = hp.rmsprop_rho;
    opt.epsilon = hp.rmsprop_epsilon;

    std::mt19937_64 rng(hp.seed ^ 0x9e3779b97f4a7c15ULL);
    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    const auto batch = static_cast<std::size_t>(hp.batch_size);

    for (int epoch = 1; epoch <= hp.epochs; ++epoch) {
        // Fisher-Yates
        for (std::size_t i = order.size(); i > 1; --i) {
            std::uniform_int_distribution<std::size_t> pick(0, i - 1);
            std::swap(order[i - 1], order[pick(rng)]);
        }

        double epoch_total = 0.0;
        int batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += batch, ++batch_index) {
            const std::size_t stop = std::min(order.size(), start + batch);
            const std::span<const std::size_t> rows(order.data() + start, stop - start);
            double loss = 0.0;
            const GradientSet grad = batch_gradient(run.model, data, rows, hp, options.constraints, &loss);
            if (!std::isfinite(loss) || !grad.all_finite())
                throw TrainingDiverged("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                                           std::to_string(batch_index),
                                       epoch, batch_index);
            epoch_total += loss * static_cast<double>(rows.size());

            std::vector<double> params = flatten(run.model.net());
            const std::vector<double> g = flatten(grad);
            rmsprop_step(params, g, opt, hp.learning_rate);
            unflatten(params, run.model.mutable_net());
        }
        run.epoch_loss.push_back(epoch_total / static_cast<double>(order.size()));

        if (options.checkpoint_every > 0 && (epoch % options.checkpoint_every == 0 || epoch == hp.epochs))
            run.checkpoints.push_back(Checkpoint{epoch, run.model.net(), run.epoch_loss.back()});
    }
    return run;
}

} // namespace snowode
