#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "snowode/simulation.hpp"
#include "snowode/training.hpp"

namespace snowode {

/// Station variables, SI once loaded: z, swe, ap in m; t_air in degC; rh in 0-1;
/// solar in W/m2; wind in m/s.
enum class Variable { z, swe, ap, t_air, rh, solar, wind };
inline constexpr std::size_t variable_count = 7;
inline constexpr std::array<Variable, variable_count> all_variables{
    Variable::z, Variable::swe, Variable::ap, Variable::t_air, Variable::rh, Variable::solar, Variable::wind};

std::string_view to_string(Variable v);
Variable variable_from_string(std::string_view s);

/// Convert a raw value to SI for the variable. Throws on units that do not fit it.
double to_si(double value, std::string_view unit, Variable var);

using Column = std::vector<std::optional<double>>;
using Flags = std::vector<bool>;

enum class Cadence { hourly, daily };
std::int64_t step_seconds(Cadence c);

/// Values on a regular time grid; a column left empty was not supplied.
struct StationTable
{
    std::string site;
    Cadence cadence = Cadence::daily;
    std::vector<std::int64_t> time;
    std::array<Column, variable_count> columns;

    std::size_t size() const { return time.size(); }
    bool has(Variable v) const { return !columns[static_cast<std::size_t>(v)].empty(); }
    Column &operator[](Variable v) { return columns[static_cast<std::size_t>(v)]; }
    const Column &operator[](Variable v) const { return columns[static_cast<std::size_t>(v)]; }

    /// Grid from `first` to `last` inclusive with all columns empty.
    static StationTable grid(std::string site, Cadence cadence, std::int64_t first, std::int64_t last);
    /// Allocate an all-missing column.
    Column &ensure(Variable v);
};

/// Per-rule counts plus free-text notices and row rejections.
struct AuditLog
{
    std::vector<std::pair<std::string, std::size_t>> counts;
    std::vector<std::string> notices;
    std::vector<std::string> rejections;

    void add(const std::string &rule, std::size_t n);
    std::size_t count(std::string_view rule) const;
    void note(std::string text) { notices.push_back(std::move(text)); }
};

struct ColumnSpec
{
    Variable var = Variable::z;
    std::string unit;
};

/// Input file layout: time column, cadence and the unit of each data column.
struct StationSchema
{
    std::string time_column = "date";
    Cadence cadence = Cadence::daily;
    std::map<std::string, ColumnSpec> columns;
    std::vector<std::string> ignore;
    std::vector<std::string> missing{"NA", "NaN", "-9999"}; // cells read as missing; empty cells always are
    double max_reject_fraction = 0.01;

    static StationSchema from_json_text(const std::string &text);
    static StationSchema load(const std::string &path);
};

/// Physical limits in SI, inclusive.
struct SensorLimits
{
    std::array<std::pair<double, double>, variable_count> bounds;

    static SensorLimits defaults();
    std::pair<double, double> &operator[](Variable v) { return bounds[static_cast<std::size_t>(v)]; }
    const std::pair<double, double> &operator[](Variable v) const { return bounds[static_cast<std::size_t>(v)]; }
};

/// Data-specific exceptions to the generic rules.
struct SiteOverride
{
    std::optional<double> t_air_min; // degC
    std::optional<double> z_max;     // m
    bool prefer_hourly_t_air = false;
};

struct OverrideTable
{
    SiteOverride defaults;
    std::map<std::string, SiteOverride> sites;

    /// Site entries replace individual default fields they set.
    SiteOverride for_site(const std::string &site) const;
    SensorLimits limits_for(const std::string &site, SensorLimits base = SensorLimits::defaults()) const;

    /// CONUS SNOTEL training set: -40 degC floor, 175 in depth cap, site 1122
    /// preferring hourly temperature.
    static OverrideTable snotel_conus();
    static OverrideTable from_json_text(const std::string &text);
    static OverrideTable load(const std::string &path);
};

StationTable parse_station_csv(std::istream &in, const StationSchema &schema, const std::string &site,
                               const SensorLimits &limits, AuditLog &audit);
StationTable parse_station_csv_file(const std::string &path, const StationSchema &schema, const std::string &site,
                                    const SensorLimits &limits, AuditLog &audit);

/// Set flagged entries to missing; returns how many values were removed.
std::size_t apply_flags(Column &values, const Flags &flags);

struct WindQcOptions
{
    double threshold = 6.0;
    std::size_t block_trigger = 24; // more flags than this enables block growth
    std::size_t block_step = 72;    // hours
    double block_fraction = 0.05;
};

/// Hourly wind outliers scored against weekly maxima (calendar weeks counted
/// from the first timestamp), with block growth for dense flag clusters.
Flags qc_wind(std::span<const std::int64_t> time, const Column &wind, const WindQcOptions &options = {},
              AuditLog *audit = nullptr);

struct FillOptions
{
    std::size_t linear_max = 6;   // hours
    std::size_t profile_max = 24; // hours
};

/// Biweek-by-hour (26 x 24) mean profile of the unflagged values.
std::array<std::array<std::optional<double>, 24>, 26> hourly_profile(std::span<const std::int64_t> time,
                                                                     const Column &values);
int biweek_of(std::int64_t t);

/// Drop flagged values, then fill interior gaps: linear up to linear_max
/// hours, from the profile up to profile_max hours. Longer or edge gaps stay.
Column qc_fill_profiles(std::span<const std::int64_t> time, const Column &values, const Flags &flags,
                        const FillOptions &options = {}, AuditLog *audit = nullptr);

struct DepthQcOptions
{
    double jump = 20.0 * 0.0254; // Z, m
    std::size_t rut_max_obs = 20;
    std::int64_t rut_max_gap = 30 * 86400;
    double ratio_min = 1.0;
    double ratio_max = 50.0;
    unsigned melt_first_month = 4;
    unsigned melt_last_month = 8;
};

/// Hourly depth rules iterated to a fixpoint: spikes, ruts, melt-season
/// regrowth and the depth/SWE ratio filter. `swe` may be empty to skip the ratio rule.
Flags qc_depth_hourly(std::span<const std::int64_t> time, const Column &z, const Column &swe,
                      const DepthQcOptions &options = {}, AuditLog *audit = nullptr);

/// z flagged where SWE is missing or z/SWE is outside [ratio_min, ratio_max].
/// Days with z = SWE = 0 pass.
Flags ratio_filter(const Column &z, const Column &swe, double ratio_min = 1.0, double ratio_max = 50.0);

enum class Rollup {
    eight_hour_bins, // mean of three 8-hour bin means, missing if any bin is empty
    daily_mean       // plain mean of the day's values
};

/// Hourly to daily. Meteorological variables use `rule`; z takes the day's
/// first observation. SWE and accumulated precipitation are not rolled up.
StationTable rollup_daily(const StationTable &hourly, Rollup rule = Rollup::eight_hour_bins);

/// Daily solar values scoring above `threshold` against the annual maxima.
Flags qc_solar_annual(std::span<const std::int64_t> time, const Column &solar, double threshold = 2.0,
                      AuditLog *audit = nullptr);

/// Merge native daily and rolled-up hourly tables. Daily z and t_air win,
/// rolled-up solar, rh and wind win; SWE and ap come from the daily table only.
StationTable coalesce_daily(const StationTable *daily, const StationTable *from_hourly, const SiteOverride &site);

/// Linear interpolation across interior gaps of at most max_steps missing values.
Column fill_linear(const Column &values, std::size_t max_steps, std::size_t *filled = nullptr);

inline constexpr double snow_alpha = -10.04;
inline constexpr double snow_beta = 1.41; // 1/degC
inline constexpr double snow_gamma = 9.0;

/// Bivariate logistic snow fraction of precipitation.
double snow_fraction(double t_air, double rh);

struct ProcessedRecord
{
    std::string site;
    std::int64_t time = 0;
    double z = 0.0;
    double swe = 0.0;
    double rh = 0.0;
    double solar = 0.0;
    double wind = 0.0;
    double t_air = 0.0;
    double precip = 0.0; // m/s
    double f_snow = 0.0;
    double p_snow = 0.0; // m/s
    double p_rain = 0.0; // m/s
    double dz_dt = 0.0;  // m/s
    double dswe_dt = 0.0;

    bool operator==(const ProcessedRecord &) const = default;
};

/// Complete-case records with forward differences over one grid step.
/// Negative precipitation differences (gauge resets) become zero.
std::vector<ProcessedRecord> derive_records(const StationTable &table, AuditLog *audit = nullptr);

struct EngineeredSet
{
    TrainingSet data;
    ScalingConstants scaling;
    std::size_t windows = 0;
    std::size_t dropped_unphysical = 0;  // SWE = 0 with z > 0
    std::size_t dropped_no_snowpack = 0; // z and SWE zero at both window ends
};

/// N-record forward window from each record: forcings and target averaged,
/// z and SWE kept from the window start. Windows must be contiguous in time.
EngineeredSet engineer_features(const std::vector<ProcessedRecord> &records, int window, StateVariable target,
                                double dt = 86400.0);

/// Simulation input built from processed records of one site.
SiteSeries to_site_series(const std::vector<ProcessedRecord> &records, const std::string &site);
std::vector<std::string> site_ids(const std::vector<ProcessedRecord> &records);

/// Pre-corrected inputs from external procedures plug in here; no-ops by default.
struct PipelineHooks
{
    std::function<void(StationTable &)> temperature_correction;
    std::function<void(StationTable &)> swe_precip_qc;
    std::function<void(StationTable &)> undercatch;
};

struct PipelineOptions
{
    WindQcOptions wind;
    FillOptions fill;
    DepthQcOptions depth;
    Rollup rollup = Rollup::eight_hour_bins;
    double solar_threshold = 2.0;
    std::size_t gap_fill_days = 3;
    OverrideTable overrides;
    PipelineHooks hooks;
};

struct RawStation
{
    std::string site;
    std::optional<StationTable> hourly;
    std::optional<StationTable> daily;
};

struct PipelineResult
{
    StationTable daily;
    std::vector<ProcessedRecord> records;
    AuditLog audit;
};

PipelineResult run_pipeline(const RawStation &raw, const PipelineOptions &options = {});

} // namespace snowode
