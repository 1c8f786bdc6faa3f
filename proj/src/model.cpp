#include "snowode/model.hpp"

#include <cmath>
#include <string>

#include "snowode/error.hpp"

namespace snowode {

std::string_view to_string(StateVariable v)
{
    return v == StateVariable::depth ? "depth" : "swe";
}

std::string_view to_string(LowerThreshold v)
{
    return v == LowerThreshold::none ? "none" : "state_floor";
}

std::string_view to_string(UpperThreshold v)
{
    switch (v) {
    case UpperThreshold::none:
        return "none";
    case UpperThreshold::snowfall_gated:
        return "snowfall_gated";
    case UpperThreshold::snowfall_rate:
        return "snowfall_rate";
    }
    return "none";
}

StateVariable state_variable_from_string(std::string_view s)
{
    if (s == "depth")
        return StateVariable::depth;
    if (s == "swe")
        return StateVariable::swe;
    throw InvalidConfiguration("unknown state variable '" + std::string(s) + "'");
}

LowerThreshold lower_threshold_from_string(std::string_view s)
{
    if (s == "none")
        return LowerThreshold::none;
    if (s == "state_floor")
        return LowerThreshold::state_floor;
    throw InvalidConfiguration("unknown lower threshold '" + std::string(s) + "'");
}

UpperThreshold upper_threshold_from_string(std::string_view s)
{
    if (s == "none")
        return UpperThreshold::none;
    if (s == "snowfall_gated")
        return UpperThreshold::snowfall_gated;
    if (s == "snowfall_rate")
        return UpperThreshold::snowfall_rate;
    throw InvalidConfiguration("unknown upper threshold '" + std::string(s) + "'");
}

ThresholdSpec ThresholdSpec::snow()
{
    return ThresholdSpec{};
}

ThresholdSpec ThresholdSpec::snowfall_capped()
{
    ThresholdSpec s;
    s.upper = UpperThreshold::snowfall_rate;
    return s;
}

void ThresholdSpec::validate(int k) const
{
    const bool needs_lower = mode != ClampMode::min_with_f;
    const bool needs_upper = mode != ClampMode::max_with_f;
    if (needs_lower != (lower != LowerThreshold::none))
        throw InvalidConfiguration("clamp mode " + std::string(to_string(mode)) + " and lower threshold " +
                                   std::string(to_string(lower)) + " disagree");
    if (needs_upper != (upper != UpperThreshold::none))
        throw InvalidConfiguration("clamp mode " + std::string(to_string(mode)) + " and upper threshold " +
                                   std::string(to_string(upper)) + " disagree");
    if (state_feature < 0 || state_feature >= k || snowfall_feature < 0 || snowfall_feature >= k)
        throw InvalidConfiguration("threshold feature index out of range for k=" + std::to_string(k));
    if (lower == LowerThreshold::state_floor && lower_hint == SignHint::nonneg)
        throw InvalidConfiguration("state floor is nonpositive; nonneg hint is wrong");
    if (upper != UpperThreshold::none && upper_hint == SignHint::nonpos)
        throw InvalidConfiguration("snowfall thresholds are nonnegative; nonpos hint is wrong");
}

std::array<double, snow_feature_count> feature_vector(const ModelInput &in, StateVariable target)
{
    if (target == StateVariable::depth)
        return {in.z, in.swe, in.rh, in.solar, in.wind, in.t_air, in.p_snow};
    return {in.swe, in.z, in.rh, in.solar, in.wind, in.t_air, in.p_snow};
}

std::array<std::string_view, snow_feature_count> feature_names(StateVariable target)
{
    if (target == StateVariable::depth)
        return {"z", "swe", "rh", "solar", "wind", "t_air", "p_snow"};
    return {"swe", "z", "rh", "solar", "wind", "t_air", "p_snow"};
}

namespace {

ThresholdLayers layers_for(const ThresholdSpec &spec, bool lower_override)
{
    const SignHint lower_hint = lower_override ? SignHint::unknown : spec.lower_hint;
    switch (spec.mode) {
    case ClampMode::max_with_f:
        return ThresholdLayers::one_sided(ClampMode::max_with_f, lower_hint);
    case ClampMode::min_with_f:
        return ThresholdLayers::one_sided(ClampMode::min_with_f, spec.upper_hint);
    case ClampMode::clamp_two_sided:
        return ThresholdLayers::two_sided(spec.upper_hint, lower_hint);
    }
    return ThresholdLayers::two_sided();
}

} // namespace

ConstrainedModel::ConstrainedModel(PredictiveNet net, ThresholdSpec spec, std::vector<double> scale_x,
                                   double scale_y, double dt, StateVariable target)
    : net_(std::move(net))
    , spec_(spec)
    , scale_x_(std::move(scale_x))
    , scale_y_(scale_y)
    , dt_(dt)
    , target_(target)
    , layers_(layers_for(spec, false))
    , override_layers_(layers_for(spec, true))
{
    spec_.validate(net_.k);
    if (static_cast<int>(scale_x_.size()) != net_.k)
        throw ShapeError("scale_x has " + std::to_string(scale_x_.size()) + " entries, net has k=" +
                         std::to_string(net_.k));
    for (double s : scale_x_)
        if (!(s > 0.0) || !std::isfinite(s))
            throw InvalidConfiguration("feature scale constants must be positive and finite");
    if (!(scale_y_ > 0.0) || !std::isfinite(scale_y_))
        throw InvalidConfiguration("target scale constant must be positive and finite");
    if (!(dt_ > 0.0) || !std::isfinite(dt_))
        throw InvalidConfiguration("dt must be positive");
}

void ConstrainedModel::scale_features(std::span<const double> raw, std::span<double> scaled) const
{
    if (static_cast<int>(raw.size()) != net_.k || scaled.size() != raw.size())
        throw ShapeError("expected " + std::to_string(net_.k) + " raw features, got " + std::to_string(raw.size()));
    for (std::size_t i = 0; i < raw.size(); ++i)
        scaled[i] = raw[i] / scale_x_[i];
}

double ConstrainedModel::raw_prediction(std::span<const double> raw) const
{
    double buf[64];
    std::vector<double> heap;
    std::span<double> scaled;
    if (raw.size() <= 64) {
        scaled = std::span<double>(buf, raw.size());
    } else {
        heap.resize(raw.size());
        scaled = heap;
    }
    scale_features(raw, scaled);
    return forward(net_, scaled) * scale_y_;
}

RateDetail ConstrainedModel::constrain(double p, std::span<const double> raw,
                                       std::optional<double> lower_override) const
{
    if (static_cast<int>(raw.size()) != net_.k)
        throw ShapeError("expected " + std::to_string(net_.k) + " raw features, got " + std::to_string(raw.size()));
    if (lower_override && spec_.mode == ClampMode::min_with_f)
        throw InvalidConfiguration("lower threshold override on a model without a lower bound");

    RateDetail d;
    d.p = p;
    const double state = raw[static_cast<std::size_t>(spec_.state_feature)];
    const double p_snow = raw[static_cast<std::size_t>(spec_.snowfall_feature)];

    double d_upper_d_p = 0.0;
    if (spec_.upper == UpperThreshold::snowfall_gated) {
        const double gate = snowfall_gate(p_snow);
        d.f_plus = (p > 0.0 ? p : 0.0) * gate;
        d_upper_d_p = p > 0.0 ? gate : 0.0;
    } else if (spec_.upper == UpperThreshold::snowfall_rate) {
        d.f_plus = p_snow;
    }
    if (lower_override)
        d.f_minus = *lower_override;
    else if (spec_.lower == LowerThreshold::state_floor)
        d.f_minus = floor_rate(state, 0.0, dt_);

    const ThresholdLayers &layers = lower_override ? override_layers_ : layers_;
    std::vector<double> grad;
    switch (spec_.mode) {
    case ClampMode::max_with_f: {
        const double in[2] = {p, d.f_minus};
        d.rate = layers.evaluate(in);
        grad = layers.gradient(in);
        d.d_rate_d_p = grad[0];
        break;
    }
    case ClampMode::min_with_f: {
        const double in[2] = {p, d.f_plus};
        d.rate = layers.evaluate(in);
        grad = layers.gradient(in);
        d.d_rate_d_p = grad[0] + grad[1] * d_upper_d_p;
        break;
    }
    case ClampMode::clamp_two_sided: {
        const double in[3] = {p, d.f_plus, d.f_minus};
        d.rate = layers.evaluate(in);
        grad = layers.gradient(in);
        d.d_rate_d_p = grad[0] + grad[1] * d_upper_d_p;
        break;
    }
    }
    return d;
}

RateDetail ConstrainedModel::detail(std::span<const double> raw, std::optional<double> lower_override) const
{
    return constrain(raw_prediction(raw), raw, lower_override);
}

std::pair<double, double> ConstrainedModel::thresholds(double p, std::span<const double> raw) const
{
    const double state = raw[static_cast<std::size_t>(spec_.state_feature)];
    const double p_snow = raw[static_cast<std::size_t>(spec_.snowfall_feature)];
    double f_plus = 0.0;
    if (spec_.upper == UpperThreshold::snowfall_gated)
        f_plus = (p > 0.0 ? p : 0.0) * snowfall_gate(p_snow);
    else if (spec_.upper == UpperThreshold::snowfall_rate)
        f_plus = p_snow;
    const double f_minus = spec_.lower == LowerThreshold::state_floor ? floor_rate(state, 0.0, dt_) : 0.0;
    return {f_plus, f_minus};
}

double ConstrainedModel::rate(std::span<const double> raw) const
{
    const double p = raw_prediction(raw);
    const auto [f_plus, f_minus] = thresholds(p, raw);
    switch (spec_.mode) {
    case ClampMode::max_with_f: {
        const double in[2] = {p, f_minus};
        return layers_.evaluate(in);
    }
    case ClampMode::min_with_f: {
        const double in[2] = {p, f_plus};
        return layers_.evaluate(in);
    }
    case ClampMode::clamp_two_sided:
        break;
    }
    const double in[3] = {p, f_plus, f_minus};
    return layers_.evaluate(in);
}

double ConstrainedModel::rate(const ModelInput &in) const
{
    if (net_.k != snow_feature_count)
        throw ShapeError("ModelInput needs a 7-input model");
    const auto x = feature_vector(in, target_);
    return rate(std::span<const double>(x));
}

bool ConstrainedModel::operator==(const ConstrainedModel &other) const
{
    return net_ == other.net_ && spec_ == other.spec_ && scale_x_ == other.scale_x_ &&
           scale_y_ == other.scale_y_ && dt_ == other.dt_ && target_ == other.target_;
}

ConstrainedModel rescale_dt(const ConstrainedModel &model, double new_dt)
{
    if (!(new_dt > 0.0))
        throw InvalidConfiguration("new dt must be positive");
    return ConstrainedModel(model.net(), model.spec(), model.scale_x(), model.scale_y(), new_dt, model.target());
}

} // namespace snowode
