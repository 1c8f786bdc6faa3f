#pragma once

#include <array>
#include <optional>
#include <span>
#include <utility>
#include <string_view>
#include <vector>

#include "snowode/constraints.hpp"
#include "snowode/core_net.hpp"

namespace snowode {

/// Which state variable the model's output is the tendency of.
enum class StateVariable { depth, swe };

enum class LowerThreshold { none, state_floor };
enum class UpperThreshold { none, snowfall_gated, snowfall_rate };

std::string_view to_string(StateVariable v);
std::string_view to_string(LowerThreshold v);
std::string_view to_string(UpperThreshold v);
StateVariable state_variable_from_string(std::string_view s);
LowerThreshold lower_threshold_from_string(std::string_view s);
UpperThreshold upper_threshold_from_string(std::string_view s);

/// Built-in threshold functions attached to a model.
///
/// state_floor:     f_- = -state / dt (state never drops below zero within dt)
/// snowfall_gated:  f_+ = ReLU(p) when snow is falling, else 0
/// snowfall_rate:   f_+ = snowfall rate (mass-conservation bound for SWE)
struct ThresholdSpec
{
    ClampMode mode = ClampMode::clamp_two_sided;
    LowerThreshold lower = LowerThreshold::state_floor;
    UpperThreshold upper = UpperThreshold::snowfall_gated;
    SignHint lower_hint = SignHint::nonpos;
    SignHint upper_hint = SignHint::nonneg;
    int state_feature = 0;
    int snowfall_feature = 6;

    static ThresholdSpec snow();
    static ThresholdSpec snowfall_capped();

    void validate(int k) const;
    bool operator==(const ThresholdSpec &) const = default;
};

inline constexpr int snow_feature_count = 7;

/// Physical (unscaled) model inputs for one step, SI units, temperature in degC.
struct ModelInput
{
    double z = 0.0;      // m
    double swe = 0.0;    // m
    double rh = 0.0;     // 0-1
    double solar = 0.0;  // W/m2
    double wind = 0.0;   // m/s
    double t_air = 0.0;  // degC
    double p_snow = 0.0; // m/s
};

/// Raw feature order: governed state first, the other state second, then
/// rh, solar, wind, t_air, p_snow.
std::array<double, snow_feature_count> feature_vector(const ModelInput &in, StateVariable target);
std::array<std::string_view, snow_feature_count> feature_names(StateVariable target);

struct RateDetail
{
    double p = 0.0;       // physical raw prediction
    double f_plus = 0.0;  // upper threshold, when present
    double f_minus = 0.0; // lower threshold, when present
    double rate = 0.0;    // constrained output
    double d_rate_d_p = 0.0;
};

/// Predictive net wrapped in fixed threshold layers, with scaling constants and dt baked in.
class ConstrainedModel
{
public:
    ConstrainedModel(PredictiveNet net, ThresholdSpec spec, std::vector<double> scale_x, double scale_y,
                     double dt, StateVariable target = StateVariable::depth);

    const PredictiveNet &net() const { return net_; }
    PredictiveNet &mutable_net() { return net_; }
    const ThresholdSpec &spec() const { return spec_; }
    const std::vector<double> &scale_x() const { return scale_x_; }
    double scale_y() const { return scale_y_; }
    double dt() const { return dt_; }
    StateVariable target() const { return target_; }
    int input_count() const { return net_.k; }

    void scale_features(std::span<const double> raw, std::span<double> scaled) const;

    /// Unconstrained prediction in physical units.
    double raw_prediction(std::span<const double> raw) const;

    /// Built-in (f_plus, f_minus) for a physical prediction p; 0 where a bound is absent.
    std::pair<double, double> thresholds(double p, std::span<const double> raw) const;

    const ThresholdLayers &layers() const { return layers_; }

    /// Constrained tendency in physical units.
    double rate(std::span<const double> raw) const;
    double rate(const ModelInput &in) const;

    /// Evaluation with thresholds. `lower_override` replaces the built-in lower
    /// threshold value and drops its sign assumption.
    RateDetail detail(std::span<const double> raw, std::optional<double> lower_override = std::nullopt) const;

    /// Thresholds applied to an externally computed physical prediction p.
    RateDetail constrain(double p, std::span<const double> raw,
                         std::optional<double> lower_override = std::nullopt) const;

    bool operator==(const ConstrainedModel &other) const;

private:
    PredictiveNet net_;
    ThresholdSpec spec_;
    std::vector<double> scale_x_;
    double scale_y_;
    double dt_;
    StateVariable target_;
    ThresholdLayers layers_;
    ThresholdLayers override_layers_;
};

/// Same weights, constraint time step replaced.
ConstrainedModel rescale_dt(const ConstrainedModel &model, double new_dt);

} // namespace snowode
