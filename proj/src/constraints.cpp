#include "snowode/constraints.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "snowode/error.hpp"
#include "snowode/exact_sum.hpp"

namespace snowode {

using exact::Expansion;

std::string_view to_string(ClampMode m)
{
    switch (m) {
    case ClampMode::max_with_f:
        return "max_with_f";
    case ClampMode::min_with_f:
        return "min_with_f";
    case ClampMode::clamp_two_sided:
        return "clamp_two_sided";
    }
    return "clamp_two_sided";
}

std::string_view to_string(SignHint h)
{
    switch (h) {
    case SignHint::unknown:
        return "unknown";
    case SignHint::nonneg:
        return "nonneg";
    case SignHint::nonpos:
        return "nonpos";
    }
    return "unknown";
}

ClampMode clamp_mode_from_string(std::string_view s)
{
    if (s == "max_with_f")
        return ClampMode::max_with_f;
    if (s == "min_with_f")
        return ClampMode::min_with_f;
    if (s == "clamp_two_sided")
        return ClampMode::clamp_two_sided;
    throw InvalidConfiguration("unknown clamp mode '" + std::string(s) + "'");
}

SignHint sign_hint_from_string(std::string_view s)
{
    if (s == "unknown")
        return SignHint::unknown;
    if (s == "nonneg")
        return SignHint::nonneg;
    if (s == "nonpos")
        return SignHint::nonpos;
    throw InvalidConfiguration("unknown sign hint '" + std::string(s) + "'");
}

namespace {

FixedLayer make_layer(int rows, int cols, std::vector<int> w, bool relu)
{
    return FixedLayer{rows, cols, std::move(w), relu};
}

void erase_row(FixedLayer &l, int r)
{
    l.weights.erase(l.weights.begin() + r * l.cols, l.weights.begin() + (r + 1) * l.cols);
    --l.rows;
}

void erase_col(FixedLayer &l, int c)
{
    for (int r = l.rows - 1; r >= 0; --r)
        l.weights.erase(l.weights.begin() + r * l.cols + c);
    --l.cols;
}

} // namespace

ThresholdLayers ThresholdLayers::one_sided(ClampMode mode, SignHint threshold_hint)
{
    ThresholdLayers t;
    t.input_hints_ = {SignHint::unknown, threshold_hint};
    // max(p, f) = ReLU(p - f) + ReLU(f) - ReLU(-f)
    // min(p, f) = -ReLU(f - p) + ReLU(f) - ReLU(-f)
    if (mode == ClampMode::max_with_f) {
        t.layers_.push_back(make_layer(3, 2, {1, -1, 0, 1, 0, -1}, true));
        t.layers_.push_back(make_layer(1, 3, {1, 1, -1}, false));
    } else if (mode == ClampMode::min_with_f) {
        t.layers_.push_back(make_layer(3, 2, {-1, 1, 0, 1, 0, -1}, true));
        t.layers_.push_back(make_layer(1, 3, {-1, 1, -1}, false));
    } else {
        throw InvalidConfiguration("one-sided layers need max_with_f or min_with_f");
    }
    t.prune();
    return t;
}

ThresholdLayers ThresholdLayers::two_sided(SignHint upper_hint, SignHint lower_hint)
{
    ThresholdLayers t;
    t.input_hints_ = {SignHint::unknown, upper_hint, lower_hint};
    // Inputs [p, f+, f-]. First layer: f+ - p, f+, -f+, f-, -f-.
    t.layers_.push_back(make_layer(5, 3,
                                   {-1, 1, 0,  //
                                    0, 1, 0,   //
                                    0, -1, 0,  //
                                    0, 0, 1,   //
                                    0, 0, -1},
                                   true));
    // alpha = ReLU(f+) - ReLU(-f+) - ReLU(f-) + ReLU(-f-) - ReLU(f+ - p) = min(p, f+) - f-,
    // plus ReLU(f-), ReLU(-f-) passed through (ReLU is idempotent).
    t.layers_.push_back(make_layer(3, 5,
                                   {-1, 1, -1, -1, 1, //
                                    0, 0, 0, 1, 0,    //
                                    0, 0, 0, 0, 1},
                                   true));
    t.layers_.push_back(make_layer(1, 3, {1, 1, -1}, false));
    t.prune();
    return t;
}

// Drop ReLU channels that are identically zero given the input sign hints,
// then any downstream rows left without inputs.
void ThresholdLayers::prune()
{
    for (std::size_t li = 0; li + 1 < layers_.size(); ++li) {
        FixedLayer &layer = layers_[li];
        FixedLayer &next = layers_[li + 1];
        if (!layer.relu)
            continue;
        for (int r = layer.rows - 1; r >= 0; --r) {
            bool dead = true;
            bool any = false;
            for (int c = 0; c < layer.cols; ++c) {
                const int w = layer.at(r, c);
                if (w == 0)
                    continue;
                any = true;
                if (li != 0) {
                    dead = false;
                    break;
                }
                const SignHint h = input_hints_[static_cast<std::size_t>(c)];
                // ReLU(w * x) is zero when w * x <= 0 is guaranteed.
                const bool nonpositive = (w > 0 && h == SignHint::nonpos) || (w < 0 && h == SignHint::nonneg);
                if (!nonpositive) {
                    dead = false;
                    break;
                }
            }
            // Single-term rows only: a sum of sign-known terms is still zero only if every term is.
            if (dead && any) {
                erase_row(layer, r);
                erase_col(next, r);
            }
        }
        for (int r = next.rows - 1; r >= 0 && next.rows > 1; --r) {
            bool empty = true;
            for (int c = 0; c < next.cols; ++c)
                if (next.at(r, c) != 0)
                    empty = false;
            if (empty && li + 2 < layers_.size()) {
                erase_row(next, r);
                erase_col(layers_[li + 2], r);
            }
        }
    }
}

std::size_t ThresholdLayers::relu_units() const
{
    std::size_t n = 0;
    for (const FixedLayer &l : layers_)
        if (l.relu)
            n += static_cast<std::size_t>(l.rows);
    return n;
}

void ThresholdLayers::check_inputs(std::span<const double> inputs) const
{
    if (inputs.size() != input_hints_.size())
        throw ShapeError("threshold layers expect " + std::to_string(input_hints_.size()) + " inputs, got " +
                         std::to_string(inputs.size()));
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        const double v = inputs[i];
        const SignHint h = input_hints_[i];
        if ((h == SignHint::nonneg && v < 0.0) || (h == SignHint::nonpos && v > 0.0))
            throw InconsistentBounds("threshold input " + std::to_string(i) + " = " + std::to_string(v) +
                                     " contradicts its declared sign hint " + std::string(to_string(h)));
    }
}

double ThresholdLayers::evaluate(std::span<const double> inputs) const
{
    check_inputs(inputs);
    std::vector<Expansion> values;
    values.reserve(inputs.size());
    for (double v : inputs)
        values.emplace_back(v);

    std::vector<Expansion> next;
    for (const FixedLayer &layer : layers_) {
        next.assign(static_cast<std::size_t>(layer.rows), Expansion{});
        for (int r = 0; r < layer.rows; ++r) {
            Expansion &acc = next[static_cast<std::size_t>(r)];
            for (int c = 0; c < layer.cols; ++c)
                acc.add(values[static_cast<std::size_t>(c)], layer.at(r, c));
            if (layer.relu && acc.sign() <= 0)
                acc.clear();
        }
        values.swap(next);
    }
    return values.front().value();
}

double ThresholdLayers::evaluate_plain(std::span<const double> inputs) const
{
    double buf_a[8];
    double buf_b[8];
    std::size_t width = inputs.size();
    for (std::size_t i = 0; i < width; ++i)
        buf_a[i] = inputs[i];
    double *cur = buf_a;
    double *nxt = buf_b;
    for (const FixedLayer &layer : layers_) {
        for (int r = 0; r < layer.rows; ++r) {
            double acc = 0.0;
            for (int c = 0; c < layer.cols; ++c)
                acc += layer.at(r, c) * cur[c];
            nxt[r] = layer.relu ? (acc > 0.0 ? acc : 0.0) : acc;
        }
        std::swap(cur, nxt);
        width = static_cast<std::size_t>(layer.rows);
    }
    return cur[0];
}

std::vector<double> ThresholdLayers::gradient(std::span<const double> inputs) const
{
    check_inputs(inputs);
    // Forward pass recording ReLU masks from exact signs.
    std::vector<std::vector<int>> masks;
    std::vector<Expansion> values;
    for (double v : inputs)
        values.emplace_back(v);
    std::vector<Expansion> next;
    for (const FixedLayer &layer : layers_) {
        std::vector<int> mask(static_cast<std::size_t>(layer.rows), 1);
        next.assign(static_cast<std::size_t>(layer.rows), Expansion{});
        for (int r = 0; r < layer.rows; ++r) {
            Expansion &acc = next[static_cast<std::size_t>(r)];
            for (int c = 0; c < layer.cols; ++c)
                acc.add(values[static_cast<std::size_t>(c)], layer.at(r, c));
            if (layer.relu && acc.sign() <= 0) {
                acc.clear();
                mask[static_cast<std::size_t>(r)] = 0;
            }
        }
        masks.push_back(std::move(mask));
        values.swap(next);
    }

    std::vector<double> upstream{1.0};
    for (std::size_t li = layers_.size(); li-- > 0;) {
        const FixedLayer &layer = layers_[li];
        for (int r = 0; r < layer.rows; ++r)
            upstream[static_cast<std::size_t>(r)] *= masks[li][static_cast<std::size_t>(r)];
        std::vector<double> down(static_cast<std::size_t>(layer.cols), 0.0);
        for (int r = 0; r < layer.rows; ++r)
            for (int c = 0; c < layer.cols; ++c)
                down[static_cast<std::size_t>(c)] += layer.at(r, c) * upstream[static_cast<std::size_t>(r)];
        upstream.swap(down);
    }
    return upstream;
}

double one_sided(double p, double f, ClampMode mode)
{
    static const ThresholdLayers max_layers = ThresholdLayers::one_sided(ClampMode::max_with_f);
    static const ThresholdLayers min_layers = ThresholdLayers::one_sided(ClampMode::min_with_f);
    const double in[2] = {p, f};
    if (mode == ClampMode::max_with_f)
        return max_layers.evaluate(in);
    if (mode == ClampMode::min_with_f)
        return min_layers.evaluate(in);
    throw InvalidConfiguration("one_sided needs max_with_f or min_with_f");
}

double two_sided(double p, double f_plus, double f_minus)
{
    static const ThresholdLayers layers = ThresholdLayers::two_sided();
    if (f_plus < f_minus)
        throw InconsistentBounds("upper threshold " + std::to_string(f_plus) + " below lower threshold " +
                                 std::to_string(f_minus));
    const double in[3] = {p, f_plus, f_minus};
    return layers.evaluate(in);
}

double floor_rate(double state, double level, double span)
{
    if (!(span > 0.0))
        throw InvalidConfiguration("time span must be positive");
    double r = (level - state) / span;
    for (int i = 0; i < 4096 && advance_state(state, span, r) < level; ++i)
        r = std::nextafter(r, std::numeric_limits<double>::infinity());
    return r;
}

const ThresholdLayers &snow_layers()
{
    static const ThresholdLayers layers = ThresholdLayers::two_sided(SignHint::nonneg, SignHint::nonpos);
    return layers;
}

const ThresholdLayers &coupled_layers()
{
    static const ThresholdLayers layers = ThresholdLayers::two_sided(SignHint::nonneg, SignHint::unknown);
    return layers;
}

double snow_depth_constraint(double p, double z, double dt, double p_snow)
{
    if (!(dt > 0.0))
        throw InvalidConfiguration("dt must be positive");
    const double f_minus = floor_rate(z, 0.0, dt);
    const double f_plus = (p > 0.0 ? p : 0.0) * snowfall_gate(p_snow);
    const double in[3] = {p, f_plus, f_minus};
    return snow_layers().evaluate(in);
}

double coupled_z_lower_bound(double p, double z_i, double swe_next, double dt, int K, double p_snow)
{
    if (!(dt > 0.0))
        throw InvalidConfiguration("dt must be positive");
    if (K < 1)
        throw InvalidConfiguration("step multiple K must be >= 1");
    const double span = static_cast<double>(K) * dt;
    const double f_minus = floor_rate(z_i, swe_next, span);
    const double f_plus = (p > 0.0 ? p : 0.0) * snowfall_gate(p_snow);
    const double in[3] = {p, f_plus, f_minus};
    return coupled_layers().evaluate(in);
}

} // namespace snowode
