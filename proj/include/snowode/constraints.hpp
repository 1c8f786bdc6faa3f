#pragma once

#include <span>
#include <string_view>
#include <vector>

namespace snowode {

enum class ClampMode { max_with_f, min_with_f, clamp_two_sided };

/// What is known about the sign of a threshold value. A known sign lets the
/// layer builder drop ReLU channels that would always evaluate to zero.
enum class SignHint { unknown, nonneg, nonpos };

std::string_view to_string(ClampMode m);
std::string_view to_string(SignHint h);
ClampMode clamp_mode_from_string(std::string_view s);
SignHint sign_hint_from_string(std::string_view s);

/// Dense layer with weights fixed at -1, 0 or +1 and no bias.
struct FixedLayer
{
    int rows = 0;
    int cols = 0;
    std::vector<int> weights; // row-major
    bool relu = false;

    int at(int r, int c) const { return weights[static_cast<std::size_t>(r * cols + c)]; }
};

/// Fixed-weight ReLU composition that computes max/min/clamp of a prediction
/// against threshold values.
///
/// One-sided networks take [p, f]; two-sided networks take [p, f_plus, f_minus].
/// Node values are carried as exact expansions, so the result is bit-identical
/// to the branch-computed max/min/clamp for every finite input.
class ThresholdLayers
{
public:
    static ThresholdLayers one_sided(ClampMode mode, SignHint threshold_hint = SignHint::unknown);
    static ThresholdLayers two_sided(SignHint upper_hint = SignHint::unknown,
                                     SignHint lower_hint = SignHint::unknown);

    std::size_t input_count() const { return input_hints_.size(); }
    const std::vector<FixedLayer> &layers() const { return layers_; }
    std::size_t relu_units() const;

    double evaluate(std::span<const double> inputs) const;

    /// Same layers in plain double arithmetic. Not exact; kept for throughput comparison.
    double evaluate_plain(std::span<const double> inputs) const;

    /// d(output)/d(input_j), using ReLU'(0) = 0.
    std::vector<double> gradient(std::span<const double> inputs) const;

private:
    void check_inputs(std::span<const double> inputs) const;
    void prune();

    std::vector<FixedLayer> layers_;
    std::vector<SignHint> input_hints_;
};

/// max(p, f) or min(p, f) through the fixed-weight layers.
double one_sided(double p, double f, ClampMode mode);

/// max(min(p, f_plus), f_minus). Throws InconsistentBounds when f_plus < f_minus.
double two_sided(double p, double f_plus, double f_minus);

struct ClampGradient
{
    double d_p = 0.0;
    double d_upper = 0.0;
    double d_lower = 0.0;
};

/// State after one step: state + span * rate, in exactly this rounding order.
inline double advance_state(double state, double span, double rate)
{
    return state + span * rate;
}

/// Smallest-order rate r near (level - state) / span such that
/// advance_state(state, span, r') >= level in floating point for every r' >= r.
double floor_rate(double state, double level, double span);

/// 1 when snow is falling, 0 otherwise. Compared on the raw snowfall rate.
inline double snowfall_gate(double p_snow) { return p_snow > 0.0 ? 1.0 : 0.0; }

/// Reduced clamp layers for the depth tendency: f_minus <= 0, f_plus >= 0.
const ThresholdLayers &snow_layers();

/// Two-sided layers without a sign assumption on the lower threshold (coupled mode).
const ThresholdLayers &coupled_layers();

/// Depth tendency bounded so that depth stays non-negative over dt and
/// cannot grow without snowfall. Throws InvalidConfiguration for dt <= 0.
double snow_depth_constraint(double p, double z, double dt, double p_snow);

/// Depth tendency whose lower bound keeps z_i + K*dt*r >= swe_next.
///
/// When swe_next exceeds every admissible upper value the lower bound wins.
double coupled_z_lower_bound(double p, double z_i, double swe_next, double dt, int K, double p_snow);

} // namespace snowode
