#include "snowode/simulation.hpp"

#include <cmath>
#include <string>

#include "snowode/error.hpp"

namespace snowode {

void SiteSeries::validate() const
{
    for (std::size_t i = 0; i < records.size(); ++i) {
        const ForcingRecord &r = records[i];
        if (i > 0 && r.time <= records[i - 1].time)
            throw DataError(site + ": record times must be strictly increasing (index " + std::to_string(i) + ")");
        const double vals[] = {r.rh, r.solar, r.wind, r.t_air, r.p_snow};
        for (double v : vals)
            if (!std::isfinite(v))
                throw DataError(site + ": non-finite forcing at index " + std::to_string(i));
        if ((r.z && (!std::isfinite(*r.z) || *r.z < 0.0)) || (r.swe && (!std::isfinite(*r.swe) || *r.swe < 0.0)))
            throw DataError(site + ": observed state must be finite and non-negative (index " + std::to_string(i) +
                            ")");
    }
}

double SimulationResult::reset_fraction() const
{
    const std::size_t transitions = steps.size() + resets.size();
    return transitions == 0 ? 0.0 : static_cast<double>(resets.size()) / static_cast<double>(transitions);
}

int step_multiple(std::int64_t from, std::int64_t to, double dt)
{
    const double gap = static_cast<double>(to - from);
    const double k = std::round(gap / dt);
    if (k < 1.0 || std::abs(k * dt - gap) > 1e-6 * dt)
        throw DataError("record spacing of " + std::to_string(to - from) + " s is not a positive multiple of dt=" +
                        std::to_string(dt) + " s");
    if (k > 1e9)
        throw DataError("record gap too large");
    return static_cast<int>(k);
}

double euler_step(const ConstrainedModel &model, const ModelInput &state, int K, bool *clamped)
{
    if (K < 1)
        throw InvalidConfiguration("step multiple K must be >= 1");
    const double current = model.target() == StateVariable::depth ? state.z : state.swe;
    const double span = static_cast<double>(K) * model.dt();
    const double next = advance_state(current, span, model.rate(state));
    if (clamped)
        *clamped = false;
    if (K > 1 && next < 0.0) {
        if (clamped)
            *clamped = true;
        return 0.0;
    }
    return next;
}

namespace {

ModelInput input_at(const ForcingRecord &r, double z, double swe)
{
    return ModelInput{z, swe, r.rh, r.solar, r.wind, r.t_air, r.p_snow};
}

std::optional<std::size_t> next_observed(const SiteSeries &s, std::size_t from)
{
    for (std::size_t m = from; m < s.records.size(); ++m)
        if (s.records[m].fully_observed())
            return m;
    return std::nullopt;
}

SimulationResult prepare(const SiteSeries &series, bool coupled)
{
    series.validate();
    if (series.records.empty())
        throw DataError(series.site + ": cannot simulate an empty series");
    SimulationResult r;
    r.site = series.site;
    r.coupled = coupled;
    const std::size_t n = series.records.size();
    r.time.reserve(n);
    for (const ForcingRecord &rec : series.records)
        r.time.push_back(rec.time);
    r.z_hat.assign(n, std::nullopt);
    if (coupled)
        r.swe_hat.assign(n, std::nullopt);
    r.reset.assign(n, false);
    return r;
}

template <typename StepFn>
void walk(const SiteSeries &series, double dt, const SimulationOptions &options, bool needs_swe_input,
          SimulationResult &result, double &z, double &swe, StepFn &&step)
{
    const auto first = next_observed(series, 0);
    if (!first)
        throw DataError(series.site + ": no fully observed record to start from");

    auto restart = [&](std::size_t m, bool is_reset, const char *reason) {
        z = *series.records[m].z;
        swe = *series.records[m].swe;
        result.z_hat[m] = z;
        if (result.coupled)
            result.swe_hat[m] = swe;
        if (is_reset) {
            result.reset[m] = true;
            result.resets.push_back(ResetEvent{m, reason});
        }
    };

    std::size_t i = *first;
    restart(i, false, "");
    std::size_t j = i + 1;
    while (j < series.records.size()) {
        const int K = step_multiple(series.records[i].time, series.records[j].time, dt);
        const bool missing = needs_swe_input && !series.records[i].swe.has_value();
        if (K > options.k_max || missing) {
            const auto m = next_observed(series, j);
            if (!m)
                break;
            restart(*m, true, missing ? "missing_input" : "gap");
            i = *m;
            j = i + 1;
            continue;
        }
        step(i, j, K);
        i = j;
        ++j;
    }
}

} // namespace

SimulationResult simulate_depth(const SiteSeries &series, const ConstrainedModel &model,
                                const SimulationOptions &options)
{
    if (model.target() != StateVariable::depth)
        throw InvalidConfiguration("simulate_depth needs a depth model");
    SimulationResult result = prepare(series, false);
    double z = 0.0;
    double swe = 0.0;
    walk(series, model.dt(), options, true, result, z, swe, [&](std::size_t i, std::size_t j, int K) {
        const ForcingRecord &rec = series.records[i];
        const ModelInput in = input_at(rec, z, *rec.swe);
        const double rate = model.rate(in);
        const double span = static_cast<double>(K) * model.dt();
        double next = advance_state(z, span, rate);
        if (K > 1 && next < 0.0) {
            result.clamps.push_back(ClampEvent{j, "z", next});
            next = 0.0;
        }
        result.steps.push_back(StepRecord{i, j, K, rate, 0.0, rec.t_air, rec.p_snow});
        z = next;
        result.z_hat[j] = z;
    });
    result.tallies = derive_density(result.z_hat, observed_swe(series), observed_z(series), observed_swe(series)).tallies;
    return result;
}

SimulationResult simulate_coupled(const SiteSeries &series, const ConstrainedModel &model_z,
                                  const ConstrainedModel &model_swe, const SimulationOptions &options)
{
    if (model_z.target() != StateVariable::depth || model_swe.target() != StateVariable::swe)
        throw InvalidConfiguration("simulate_coupled needs a depth model and a SWE model");
    if (model_z.dt() != model_swe.dt())
        throw InvalidConfiguration("coupled models must share dt");
    SimulationResult result = prepare(series, true);
    double z = 0.0;
    double swe = 0.0;
    walk(series, model_z.dt(), options, false, result, z, swe, [&](std::size_t i, std::size_t j, int K) {
        const ForcingRecord &rec = series.records[i];
        const ModelInput in = input_at(rec, z, swe);
        const double span = static_cast<double>(K) * model_z.dt();

        // SWE first, so the depth floor can reference the new SWE.
        const double rate_swe = model_swe.rate(in);
        double swe_next = advance_state(swe, span, rate_swe);
        if (K > 1 && swe_next < 0.0) {
            result.clamps.push_back(ClampEvent{j, "swe", swe_next});
            swe_next = 0.0;
        }

        const auto raw = feature_vector(in, StateVariable::depth);
        const double floor = floor_rate(z, swe_next, span);
        const double rate_z = model_z.detail(raw, floor).rate;
        const double z_next = advance_state(z, span, rate_z);

        result.steps.push_back(StepRecord{i, j, K, rate_z, rate_swe, rec.t_air, rec.p_snow});
        z = z_next;
        swe = swe_next;
        result.z_hat[j] = z;
        result.swe_hat[j] = swe;
    });
    result.tallies = derive_density(result.z_hat, result.swe_hat, observed_z(series), observed_swe(series)).tallies;
    return result;
}

std::vector<std::optional<double>> density_ratio(const std::vector<std::optional<double>> &z,
                                                 const std::vector<std::optional<double>> &swe)
{
    if (z.size() != swe.size())
        throw ShapeError("depth and SWE series differ in length");
    std::vector<std::optional<double>> out(z.size());
    for (std::size_t i = 0; i < z.size(); ++i)
        if (z[i] && swe[i] && *z[i] > 0.0)
            out[i] = *swe[i] / *z[i];
    return out;
}

namespace {

bool physical(const std::optional<double> &ratio)
{
    return ratio && *ratio > 0.0 && *ratio < 1.0;
}

} // namespace

DensityComparison derive_density(const std::vector<std::optional<double>> &model_z,
                                 const std::vector<std::optional<double>> &model_swe,
                                 const std::vector<std::optional<double>> &data_z,
                                 const std::vector<std::optional<double>> &data_swe)
{
    const std::size_t n = model_z.size();
    if (model_swe.size() != n || data_z.size() != n || data_swe.size() != n)
        throw ShapeError("density inputs must be aligned");
    DensityComparison out;
    out.model_ratio = density_ratio(model_z, model_swe);
    out.data_ratio = density_ratio(data_z, data_swe);
    out.scored.assign(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        if (model_z[i] && data_z[i]) {
            if (*model_z[i] == 0.0 && *data_z[i] > 0.0)
                ++out.tallies.false_non_snowpacks;
            if (*model_z[i] > 0.0 && *data_z[i] == 0.0)
                ++out.tallies.false_snowpacks;
        }
        if (out.model_ratio[i] && !physical(out.model_ratio[i]))
            ++out.tallies.unphysical_density_points;
        if (physical(out.model_ratio[i]) && physical(out.data_ratio[i])) {
            out.scored[i] = true;
            ++out.tallies.scored_points;
        }
    }
    return out;
}

std::vector<std::optional<double>> observed_z(const SiteSeries &series)
{
    std::vector<std::optional<double>> out;
    out.reserve(series.records.size());
    for (const ForcingRecord &r : series.records)
        out.push_back(r.z);
    return out;
}

std::vector<std::optional<double>> observed_swe(const SiteSeries &series)
{
    std::vector<std::optional<double>> out;
    out.reserve(series.records.size());
    for (const ForcingRecord &r : series.records)
        out.push_back(r.swe);
    return out;
}

} // namespace snowode
