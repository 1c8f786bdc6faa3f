#include "snowode/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "snowode/error.hpp"
#include "snowode/time.hpp"

namespace snowode {

double fresh_snow_ratio(double t_air, const SnowProcess &p)
{
    if (t_air >= 0.0)
        return p.eta_warm;
    if (t_air <= p.t_cold)
        return p.eta_cold;
    return p.eta_warm + (p.eta_cold - p.eta_warm) * (t_air / p.t_cold);
}

SyntheticSite generate_site(const SyntheticOptions &o)
{
    if (o.years < 1)
        throw InvalidConfiguration("synthetic site needs at least one year");
    if (o.steps_per_day != 1 && o.steps_per_day != 24)
        throw InvalidConfiguration("steps_per_day must be 1 or 24");
    if (o.start % seconds_per_day != 0)
        throw InvalidConfiguration("synthetic start must be midnight");

    std::mt19937_64 rng(o.seed);
    std::normal_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> uniform(0.0, 1.0);
    std::exponential_distribution<double> expo(1.0);

    const int days = 365 * o.years;
    const int spd = o.steps_per_day;
    const Cadence cadence = spd == 1 ? Cadence::daily : Cadence::hourly;
    const std::int64_t step = step_seconds(cadence);
    const std::int64_t last = o.start + (static_cast<std::int64_t>(days) * spd - 1) * step;

    SyntheticSite out;
    out.table = StationTable::grid(o.site, cadence, o.start, last);
    for (Variable v : all_variables)
        out.table.ensure(v);
    out.z_true.reserve(out.table.size());
    out.swe_true.reserve(out.table.size());

    const double dd = 1.0 / spd; // days per step
    const SnowProcess &pr = o.process;
    const SyntheticClimate &cl = o.climate;
    double z = 0.0, swe = 0.0, ap = 0.0;
    int gap_left = 0;
    std::size_t idx = 0;
    for (int d = 0; d < days; ++d) {
        const std::int64_t day_start = o.start + static_cast<std::int64_t>(d) * seconds_per_day;
        const double doy = static_cast<double>(day_of_year(day_start));
        const double season = 2.0 * std::numbers::pi * (doy - 15.0) / 365.0;
        const double t_day = cl.t_mean - cl.t_amplitude * std::cos(season) + cl.t_noise * unit(rng);
        const bool wet = uniform(rng) < cl.wet_probability;
        const double p_day = wet ? cl.wet_mean * expo(rng) : 0.0;
        const double rh = std::clamp(0.55 + 0.3 * (wet ? 1.0 : 0.0) + 0.08 * unit(rng), 0.05, 1.0);
        const double solar =
            std::max(0.0, 160.0 + 110.0 * std::sin(2.0 * std::numbers::pi * (doy - 80.0) / 365.0) -
                              70.0 * (wet ? 1.0 : 0.0) + 20.0 * unit(rng));
        const double wind = std::abs(3.0 + 1.5 * unit(rng));

        if (gap_left == 0 && o.gap_probability > 0.0 && uniform(rng) < o.gap_probability)
            gap_left = 1 + static_cast<int>(uniform(rng) * o.max_gap_days);
        const bool missing = gap_left > 0;
        if (gap_left > 0)
            --gap_left;

        const CivilTime c = to_civil(day_start);
        if (c.month == 10 && c.day == 1)
            ap = 0.0; // water-year gauge reset

        for (int s = 0; s < spd; ++s, ++idx) {
            const double t_air =
                t_day + (spd > 1 ? cl.diurnal * std::sin(2.0 * std::numbers::pi * (s - 9) / 24.0) : 0.0);
            const double p = p_day * dd; // m of water this step
            const double p_snow = snow_fraction(t_air, rh) * p;

            out.z_true.push_back(z);
            out.swe_true.push_back(swe);
            if (!missing) {
                const double z_obs = z > 0.0 ? std::max(0.0, z + o.noise_sd * unit(rng)) : 0.0;
                const double swe_obs = swe > 0.0 ? std::max(0.0, swe + 0.25 * o.noise_sd * unit(rng)) : 0.0;
                out.table[Variable::z][idx] = z_obs;
                out.table[Variable::swe][idx] = swe_obs;
                out.table[Variable::ap][idx] = ap;
                out.table[Variable::t_air][idx] = t_air;
                out.table[Variable::rh][idx] = rh;
                out.table[Variable::solar][idx] = solar;
                out.table[Variable::wind][idx] = wind;
            }

            const double warm = std::max(0.0, t_air);
            const double swe_gain = swe + p_snow;
            const double swe_next = swe_gain - std::min(swe_gain, pr.melt_swe * warm * dd);
            double dz = fresh_snow_ratio(t_air, pr) * p_snow - pr.melt_depth * warm * dd - pr.compaction * z * dd;
            if (o.noise == NoiseKind::skewed && z > 0.0)
                dz += 2.0 * o.noise_sd * std::sqrt(dd) * (expo(rng) - 1.0);
            double z_next = std::max(0.0, z + dz);
            if (swe_next == 0.0)
                z_next = 0.0;
            z_next = std::clamp(z_next, swe_next, 40.0 * swe_next);

            z = z_next;
            swe = swe_next;
            ap += p;
        }
    }
    return out;
}

std::vector<SyntheticOptions> synthetic_corpus(int sites, std::uint64_t seed, int years, int steps_per_day)
{
    if (sites < 1)
        throw InvalidConfiguration("synthetic corpus needs at least one site");
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<SyntheticOptions> out;
    for (int i = 0; i < sites; ++i) {
        SyntheticOptions o;
        o.site = "syn" + std::to_string(i + 1);
        o.years = years;
        o.steps_per_day = steps_per_day;
        o.seed = seed * 1000003ULL + static_cast<std::uint64_t>(i) + 1;
        o.climate.t_mean = -4.0 + 6.0 * u(rng);
        o.climate.t_amplitude = 8.0 + 4.0 * u(rng);
        o.climate.wet_probability = 0.2 + 0.2 * u(rng);
        o.climate.wet_mean = 0.005 + 0.007 * u(rng);
        out.push_back(o);
    }
    return out;
}

} // namespace snowode
