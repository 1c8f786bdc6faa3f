#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "snowode/model.hpp"

namespace snowode {

/// One time step of forcing plus the observed states at that time.
struct ForcingRecord
{
    std::int64_t time = 0; // seconds since 1970-01-01 UTC
    std::optional<double> z;
    std::optional<double> swe;
    double rh = 0.0;
    double solar = 0.0;
    double wind = 0.0;
    double t_air = 0.0;
    double p_snow = 0.0;

    bool fully_observed() const { return z.has_value() && swe.has_value(); }
};

struct SiteSeries
{
    std::string site;
    std::vector<ForcingRecord> records;

    /// Strictly increasing times, finite values, non-negative observed states.
    void validate() const;
};

struct ResetEvent
{
    std::size_t index = 0;
    std::string reason; // "gap", "missing_input"
};

struct ClampEvent
{
    std::size_t index = 0;
    std::string variable; // "z" or "swe"
    double raw_value = 0.0;
};

/// One Euler update from record `from` to record `to`.
struct StepRecord
{
    std::size_t from = 0;
    std::size_t to = 0;
    int k = 1;
    double rate_z = 0.0;
    double rate_swe = 0.0; // coupled mode only
    double t_air = 0.0;
    double p_snow = 0.0;
};

struct DensityTallies
{
    std::size_t false_snowpacks = 0;
    std::size_t false_non_snowpacks = 0;
    std::size_t unphysical_density_points = 0;
    std::size_t scored_points = 0;
};

struct SimulationResult
{
    std::string site;
    bool coupled = false;
    std::vector<std::int64_t> time;
    std::vector<std::optional<double>> z_hat;
    std::vector<std::optional<double>> swe_hat; // coupled mode only
    std::vector<bool> reset;
    std::vector<ResetEvent> resets;
    std::vector<ClampEvent> clamps;
    std::vector<StepRecord> steps;
    DensityTallies tallies;

    double reset_fraction() const;
};

struct SimulationOptions
{
    int k_max = 5;
};

/// Number of model steps between two times; throws if not a whole multiple of dt.
int step_multiple(std::int64_t from, std::int64_t to, double dt);

/// z_{i+K} = z_i + K dt M(...). For K > 1 a negative result is zeroed and,
/// when `clamped` is given, reported through it.
double euler_step(const ConstrainedModel &model, const ModelInput &state, int K, bool *clamped = nullptr);

/// Depth parameterization run: SWE comes from observations each step.
SimulationResult simulate_depth(const SiteSeries &series, const ConstrainedModel &model,
                                const SimulationOptions &options = {});

/// Standalone run: SWE is stepped first, then depth with a lower bound that keeps z >= SWE.
SimulationResult simulate_coupled(const SiteSeries &series, const ConstrainedModel &model_z,
                                  const ConstrainedModel &model_swe, const SimulationOptions &options = {});

struct DensityComparison
{
    std::vector<std::optional<double>> model_ratio; // rho_snow / rho_water
    std::vector<std::optional<double>> data_ratio;
    std::vector<bool> scored;
    DensityTallies tallies;
};

/// SWE / z where z > 0, otherwise empty.
std::vector<std::optional<double>> density_ratio(const std::vector<std::optional<double>> &z,
                                                 const std::vector<std::optional<double>> &swe);

/// Compare model and data bulk density at shared timestamps and tally
/// false snowpacks, false non-snowpacks and unphysical model densities.
DensityComparison derive_density(const std::vector<std::optional<double>> &model_z,
                                 const std::vector<std::optional<double>> &model_swe,
                                 const std::vector<std::optional<double>> &data_z,
                                 const std::vector<std::optional<double>> &data_swe);

std::vector<std::optional<double>> observed_z(const SiteSeries &series);
std::vector<std::optional<double>> observed_swe(const SiteSeries &series);

} // namespace snowode
