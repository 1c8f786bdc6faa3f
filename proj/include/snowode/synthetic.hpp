#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "snowode/pipeline.hpp"

namespace snowode {

enum class NoiseKind {
    gaussian, // observation noise on depth
    skewed    // gaussian observation noise plus right-skewed, zero-mean noise on depth increments
};

struct SyntheticClimate
{
    double t_mean = 0.0;       // degC
    double t_amplitude = 10.0; // seasonal half-range, degC
    double t_noise = 3.0;      // day-to-day sd, degC
    double diurnal = 4.0;      // hourly runs only, degC
    double wet_probability = 0.3;
    double wet_mean = 0.008; // m/day of water on wet days
};

/// Bounded snow-like process. Depth gains eta(T) per unit snowfall water,
/// loses melt_depth per degree-day above zero plus an optional compaction fraction per day.
struct SnowProcess
{
    double eta_cold = 14.0; // fresh-snow depth per unit water at t_cold and below
    double eta_warm = 6.0;  // at 0 degC and above
    double t_cold = -10.0;
    double melt_depth = 0.008; // m / degC / day
    double melt_swe = 0.003;   // m / degC / day
    double compaction = 0.0;   // 1 / day, settling applied in every step
};

double fresh_snow_ratio(double t_air, const SnowProcess &p);

struct SyntheticOptions
{
    std::string site = "synthetic";
    int years = 2;
    int steps_per_day = 1; // 1 or 24
    std::int64_t start = 970358400; // 2000-10-01
    std::uint64_t seed = 1;
    double noise_sd = 0.01; // m
    NoiseKind noise = NoiseKind::gaussian;
    double gap_probability = 0.0; // chance per day of starting a data gap
    int max_gap_days = 8;
    SyntheticClimate climate;
    SnowProcess process;
};

struct SyntheticSite
{
    StationTable table; // all seven variables, SI, on the requested cadence
    std::vector<double> z_true;
    std::vector<double> swe_true;
};

SyntheticSite generate_site(const SyntheticOptions &options);

/// `sites` distinct climates derived from one seed.
std::vector<SyntheticOptions> synthetic_corpus(int sites, std::uint64_t seed, int years = 2, int steps_per_day = 1);

} // namespace snowode
