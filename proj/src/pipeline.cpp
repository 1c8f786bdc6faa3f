#include "snowode/pipeline.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <numeric>
#include <sstream>

#include "json.hpp"
#include "snowode/csv.hpp"
#include "snowode/error.hpp"
#include "snowode/metrics.hpp"
#include "snowode/time.hpp"

namespace snowode {

using nlohmann::json;

std::string_view to_string(Variable v)
{
    switch (v) {
    case Variable::z:
        return "z";
    case Variable::swe:
        return "swe";
    case Variable::ap:
        return "ap";
    case Variable::t_air:
        return "t_air";
    case Variable::rh:
        return "rh";
    case Variable::solar:
        return "solar";
    case Variable::wind:
        return "wind";
    }
    return "z";
}

Variable variable_from_string(std::string_view s)
{
    for (Variable v : all_variables)
        if (to_string(v) == s)
            return v;
    throw InvalidConfiguration("unknown variable '" + std::string(s) + "'");
}

double to_si(double value, std::string_view unit, Variable var)
{
    auto bad = [&] {
        return InvalidConfiguration("unit '" + std::string(unit) + "' does not apply to " + std::string(to_string(var)));
    };
    switch (var) {
    case Variable::z:
    case Variable::swe:
    case Variable::ap:
        if (unit == "m")
            return value;
        if (unit == "cm")
            return value * 0.01;
        if (unit == "mm")
            return value * 0.001;
        if (unit == "in")
            return value * 0.0254;
        throw bad();
    case Variable::t_air:
        if (unit == "degC" || unit == "C")
            return value;
        if (unit == "degF" || unit == "F")
            return (value - 32.0) * 5.0 / 9.0;
        if (unit == "K")
            return value - 273.15;
        throw bad();
    case Variable::rh:
        if (unit == "fraction" || unit == "1")
            return value;
        if (unit == "percent" || unit == "%")
            return value / 100.0;
        throw bad();
    case Variable::solar:
        if (unit == "W/m2" || unit == "W m-2")
            return value;
        throw bad();
    case Variable::wind:
        if (unit == "m/s")
            return value;
        if (unit == "km/h" || unit == "kph")
            return value / 3.6;
        if (unit == "mph")
            return value * 0.44704;
        throw bad();
    }
    throw bad();
}

std::int64_t step_seconds(Cadence c)
{
    return c == Cadence::hourly ? seconds_per_hour : seconds_per_day;
}

StationTable StationTable::grid(std::string site, Cadence cadence, std::int64_t first, std::int64_t last)
{
    const std::int64_t step = step_seconds(cadence);
    if (last < first || (last - first) % step != 0)
        throw DataError("grid bounds are not aligned to the cadence");
    StationTable t;
    t.site = std::move(site);
    t.cadence = cadence;
    for (std::int64_t s = first; s <= last; s += step)
        t.time.push_back(s);
    return t;
}

Column &StationTable::ensure(Variable v)
{
    Column &c = (*this)[v];
    if (c.empty())
        c.assign(time.size(), std::nullopt);
    return c;
}

void AuditLog::add(const std::string &rule, std::size_t n)
{
    for (auto &[k, c] : counts)
        if (k == rule) {
            c += n;
            return;
        }
    counts.emplace_back(rule, n);
}

std::size_t AuditLog::count(std::string_view rule) const
{
    for (const auto &[k, c] : counts)
        if (k == rule)
            return c;
    return 0;
}

namespace {

std::string read_text(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

json parse_json(const std::string &text, const char *what)
{
    try {
        return json::parse(text);
    } catch (const json::exception &e) {
        throw InvalidConfiguration(std::string("malformed ") + what + ": " + e.what());
    }
}

Cadence cadence_from_string(const std::string &s)
{
    if (s == "hourly")
        return Cadence::hourly;
    if (s == "daily")
        return Cadence::daily;
    throw InvalidConfiguration("cadence must be 'hourly' or 'daily', got '" + s + "'");
}

SiteOverride override_from_json(const json &j)
{
    SiteOverride o;
    if (j.contains("t_air_min"))
        o.t_air_min = j.at("t_air_min").get<double>();
    if (j.contains("z_max"))
        o.z_max = j.at("z_max").get<double>();
    if (j.contains("prefer_hourly_t_air"))
        o.prefer_hourly_t_air = j.at("prefer_hourly_t_air").get<bool>();
    return o;
}

} // namespace

StationSchema StationSchema::from_json_text(const std::string &text)
{
    const json j = parse_json(text, "station schema");
    StationSchema s;
    try {
        s.time_column = j.value("time_column", s.time_column);
        s.cadence = cadence_from_string(j.value("cadence", std::string("daily")));
        s.max_reject_fraction = j.value("max_reject_fraction", s.max_reject_fraction);
        if (j.contains("ignore"))
            s.ignore = j.at("ignore").get<std::vector<std::string>>();
        if (j.contains("missing"))
            s.missing = j.at("missing").get<std::vector<std::string>>();
        for (const auto &[name, spec] : j.at("columns").items()) {
            ColumnSpec c;
            c.var = variable_from_string(spec.at("variable").get<std::string>());
            c.unit = spec.at("unit").get<std::string>();
            to_si(0.0, c.unit, c.var);
            s.columns[name] = c;
        }
    } catch (const json::exception &e) {
        throw InvalidConfiguration(std::string("station schema: ") + e.what());
    }
    if (!(s.max_reject_fraction >= 0.0 && s.max_reject_fraction <= 1.0))
        throw InvalidConfiguration("max_reject_fraction must be in [0, 1]");
    return s;
}

StationSchema StationSchema::load(const std::string &path)
{
    return from_json_text(read_text(path));
}

SensorLimits SensorLimits::defaults()
{
    SensorLimits l;
    l[Variable::z] = {0.0, 10.0};
    l[Variable::swe] = {0.0, 5.0};
    l[Variable::ap] = {0.0, 20.0};
    l[Variable::t_air] = {-60.0, 60.0};
    l[Variable::rh] = {0.0, 1.0};
    l[Variable::solar] = {0.0, 1500.0};
    l[Variable::wind] = {0.0, 60.0};
    return l;
}

SiteOverride OverrideTable::for_site(const std::string &site) const
{
    SiteOverride o = defaults;
    const auto it = sites.find(site);
    if (it != sites.end()) {
        if (it->second.t_air_min)
            o.t_air_min = it->second.t_air_min;
        if (it->second.z_max)
            o.z_max = it->second.z_max;
        o.prefer_hourly_t_air = it->second.prefer_hourly_t_air;
    }
    return o;
}

SensorLimits OverrideTable::limits_for(const std::string &site, SensorLimits base) const
{
    const SiteOverride o = for_site(site);
    if (o.t_air_min)
        base[Variable::t_air].first = *o.t_air_min;
    if (o.z_max)
        base[Variable::z].second = *o.z_max;
    return base;
}

OverrideTable OverrideTable::snotel_conus()
{
    OverrideTable t;
    t.defaults.t_air_min = -40.0;
    t.defaults.z_max = 175.0 * 0.0254;
    t.sites["1122"].prefer_hourly_t_air = true;
    return t;
}

OverrideTable OverrideTable::from_json_text(const std::string &text)
{
    const json j = parse_json(text, "override table");
    OverrideTable t;
    try {
        if (j.contains("defaults"))
            t.defaults = override_from_json(j.at("defaults"));
        if (j.contains("sites"))
            for (const auto &[site, o] : j.at("sites").items())
                t.sites[site] = override_from_json(o);
    } catch (const json::exception &e) {
        throw InvalidConfiguration(std::string("override table: ") + e.what());
    }
    return t;
}

OverrideTable OverrideTable::load(const std::string &path)
{
    return from_json_text(read_text(path));
}

StationTable parse_station_csv(std::istream &in, const StationSchema &schema, const std::string &site,
                               const SensorLimits &limits, AuditLog &audit)
{
    const CsvDocument doc = read_csv(in);
    const std::size_t time_col = doc.require(schema.time_column);
    std::vector<std::optional<ColumnSpec>> mapping(doc.header.size());
    for (std::size_t c = 0; c < doc.header.size(); ++c) {
        if (c == time_col)
            continue;
        const std::string &name = doc.header[c];
        const auto it = schema.columns.find(name);
        if (it != schema.columns.end())
            mapping[c] = it->second;
        else if (std::find(schema.ignore.begin(), schema.ignore.end(), name) == schema.ignore.end())
            throw DataError(site + ": unknown column '" + name + "'");
    }

    struct Row
    {
        std::int64_t t;
        std::array<std::optional<double>, variable_count> v;
        std::size_t line;
    };
    std::vector<Row> rows;
    const std::int64_t step = step_seconds(schema.cadence);
    std::size_t rejected = 0;
    for (std::size_t r = 0; r < doc.rows.size(); ++r) {
        const auto &fields = doc.rows[r];
        try {
            if (fields.size() != doc.header.size())
                throw DataError("expected " + std::to_string(doc.header.size()) + " fields, got " +
                                std::to_string(fields.size()));
            Row row{parse_timestamp(fields[time_col]), {}, doc.line_numbers[r]};
            if (row.t % step != 0)
                throw DataError("timestamp not aligned to " +
                                std::string(schema.cadence == Cadence::hourly ? "the hour" : "midnight"));
            for (std::size_t c = 0; c < fields.size(); ++c)
                if (mapping[c]) {
                    const std::string_view cell = fields[c];
                    if (std::find(schema.missing.begin(), schema.missing.end(), cell) != schema.missing.end())
                        continue;
                    const auto raw = parse_optional_double(cell);
                    if (raw)
                        row.v[static_cast<std::size_t>(mapping[c]->var)] = to_si(*raw, mapping[c]->unit, mapping[c]->var);
                }
            rows.push_back(row);
        } catch (const DataError &e) {
            ++rejected;
            audit.rejections.push_back(site + " line " + std::to_string(doc.line_numbers[r]) + ": " + e.what());
        }
    }
    audit.add("rows_read", doc.rows.size());
    audit.add("rows_rejected", rejected);
    if (!doc.rows.empty() &&
        static_cast<double>(rejected) > schema.max_reject_fraction * static_cast<double>(doc.rows.size()))
        throw DataError(site + ": rejected " + std::to_string(rejected) + " of " + std::to_string(doc.rows.size()) +
                        " rows, above the allowed fraction");
    if (rows.empty())
        throw DataError(site + ": no usable rows");

    std::stable_sort(rows.begin(), rows.end(), [](const Row &a, const Row &b) { return a.t < b.t; });
    StationTable table = StationTable::grid(site, schema.cadence, rows.front().t, rows.back().t);
    for (const auto &[name, spec] : schema.columns)
        if (doc.column(name) >= 0)
            table.ensure(spec.var);

    std::vector<bool> seen(table.size(), false);
    for (const Row &row : rows) {
        const auto idx = static_cast<std::size_t>((row.t - table.time.front()) / step);
        if (seen[idx]) {
            audit.add("duplicate_timestamps", 1);
            audit.rejections.push_back(site + " line " + std::to_string(row.line) + ": duplicate timestamp");
            continue;
        }
        seen[idx] = true;
        for (Variable v : all_variables) {
            const auto &val = row.v[static_cast<std::size_t>(v)];
            if (!val)
                continue;
            const auto [lo, hi] = limits[v];
            if (!std::isfinite(*val) || *val < lo || *val > hi) {
                audit.add("bounds_" + std::string(to_string(v)), 1);
                continue;
            }
            table[v][idx] = *val;
        }
    }
    return table;
}

StationTable parse_station_csv_file(const std::string &path, const StationSchema &schema, const std::string &site,
                                    const SensorLimits &limits, AuditLog &audit)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open '" + path + "'");
    return parse_station_csv(in, schema, site, limits, audit);
}

std::size_t apply_flags(Column &values, const Flags &flags)
{
    if (flags.size() != values.size())
        throw ShapeError("flag vector does not match the series");
    std::size_t removed = 0;
    for (std::size_t i = 0; i < values.size(); ++i)
        if (flags[i] && values[i]) {
            values[i].reset();
            ++removed;
        }
    return removed;
}

namespace {

void require_regular(std::span<const std::int64_t> time, std::int64_t step, const char *what)
{
    for (std::size_t i = 1; i < time.size(); ++i)
        if (time[i] - time[i - 1] != step)
            throw DataError(std::string(what) + " needs a regular grid");
}

std::size_t count_true(const Flags &f)
{
    return static_cast<std::size_t>(std::count(f.begin(), f.end(), true));
}

} // namespace

Flags qc_wind(std::span<const std::int64_t> time, const Column &wind, const WindQcOptions &options, AuditLog *audit)
{
    if (time.size() != wind.size())
        throw ShapeError("wind series and time differ in length");
    require_regular(time, seconds_per_hour, "wind QC");
    const std::size_t n = wind.size();
    Flags flags(n, false);
    constexpr std::int64_t week = 7 * seconds_per_day;
    if (n == 0 || time.back() - time.front() + seconds_per_hour < week) {
        if (audit)
            audit->note("wind QC skipped: series shorter than one week");
        return flags;
    }

    std::map<std::int64_t, double> weekly;
    for (std::size_t i = 0; i < n; ++i)
        if (wind[i]) {
            const std::int64_t w = (time[i] - time.front()) / week;
            auto [it, fresh] = weekly.try_emplace(w, *wind[i]);
            if (!fresh)
                it->second = std::max(it->second, *wind[i]);
        }
    std::vector<double> maxima;
    for (const auto &[w, m] : weekly)
        maxima.push_back(m);
    if (maxima.empty())
        return flags;
    const double med = median(maxima);
    const double iqr = quantile(maxima, 0.75) - quantile(maxima, 0.25);
    if (!(iqr > 0.0)) {
        if (audit)
            audit->note("wind QC skipped: weekly maxima have zero IQR");
        return flags;
    }
    for (std::size_t i = 0; i < n; ++i)
        if (wind[i] && (*wind[i] - med) / iqr > options.threshold)
            flags[i] = true;

    const std::size_t base_flags = count_true(flags);
    if (base_flags > options.block_trigger) {
        std::vector<std::size_t> pf(n + 1, 0), po(n + 1, 0);
        for (std::size_t i = 0; i < n; ++i) {
            pf[i + 1] = pf[i] + (flags[i] ? 1 : 0);
            po[i + 1] = po[i] + (wind[i] ? 1 : 0);
        }
        const Flags point = flags;
        const std::size_t step = options.block_step;
        std::size_t i = 0;
        while (i < n) {
            if (!point[i]) {
                ++i;
                continue;
            }
            // Scanning from the earliest flag means nothing lies behind the block start.
            std::size_t hi = i;
            while (hi + 1 < n) {
                const std::size_t next = std::min(n - 1, hi + step);
                if (pf[next + 1] - pf[hi + 1] == 0)
                    break;
                hi = next;
            }
            const std::size_t nf = pf[hi + 1] - pf[i];
            const std::size_t no = po[hi + 1] - po[i];
            if (no > 0 && static_cast<double>(nf) > options.block_fraction * static_cast<double>(no))
                for (std::size_t k = i; k <= hi; ++k)
                    if (wind[k])
                        flags[k] = true;
            i = hi + 1;
        }
    }
    if (audit)
        audit->add("wind_flags", count_true(flags));
    return flags;
}

int biweek_of(std::int64_t t)
{
    return std::min(25, day_of_year(t) / 14);
}

std::array<std::array<std::optional<double>, 24>, 26> hourly_profile(std::span<const std::int64_t> time,
                                                                     const Column &values)
{
    std::array<std::array<double, 24>, 26> sum{};
    std::array<std::array<std::size_t, 24>, 26> cnt{};
    for (std::size_t i = 0; i < values.size(); ++i)
        if (values[i]) {
            const auto b = static_cast<std::size_t>(biweek_of(time[i]));
            const auto h = static_cast<std::size_t>(floor_div(time[i], seconds_per_hour) % 24);
            sum[b][h] += *values[i];
            ++cnt[b][h];
        }
    std::array<std::array<std::optional<double>, 24>, 26> out{};
    for (std::size_t b = 0; b < 26; ++b)
        for (std::size_t h = 0; h < 24; ++h)
            if (cnt[b][h])
                out[b][h] = sum[b][h] / static_cast<double>(cnt[b][h]);
    return out;
}

Column qc_fill_profiles(std::span<const std::int64_t> time, const Column &values, const Flags &flags,
                        const FillOptions &options, AuditLog *audit)
{
    if (time.size() != values.size())
        throw ShapeError("series and time differ in length");
    require_regular(time, seconds_per_hour, "profile fill");
    Column v = values;
    if (!flags.empty())
        apply_flags(v, flags);
    const auto profile = hourly_profile(time, v);

    std::size_t linear = 0, from_profile = 0, empty_cell = 0;
    Column out = v;
    const std::size_t n = v.size();
    std::size_t i = 0;
    while (i < n) {
        if (v[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && !v[j])
            ++j;
        const std::size_t len = j - i;
        if (i > 0 && j < n) {
            const double a = *v[i - 1];
            const double b = *v[j];
            if (len <= options.linear_max) {
                for (std::size_t k = i; k < j; ++k)
                    out[k] = a + (b - a) * static_cast<double>(k - i + 1) / static_cast<double>(len + 1);
                linear += len;
            } else if (len <= options.profile_max) {
                for (std::size_t k = i; k < j; ++k) {
                    const auto bw = static_cast<std::size_t>(biweek_of(time[k]));
                    const auto h = static_cast<std::size_t>(floor_div(time[k], seconds_per_hour) % 24);
                    if (profile[bw][h]) {
                        out[k] = profile[bw][h];
                        ++from_profile;
                    } else {
                        ++empty_cell;
                    }
                }
            }
        }
        i = j;
    }
    if (audit) {
        audit->add("fill_linear", linear);
        audit->add("fill_profile", from_profile);
        if (empty_cell)
            audit->add("fill_profile_empty_cell", empty_cell);
    }
    return out;
}

Flags ratio_filter(const Column &z, const Column &swe, double ratio_min, double ratio_max)
{
    if (z.size() != swe.size())
        throw ShapeError("depth and SWE series differ in length");
    Flags f(z.size(), false);
    for (std::size_t i = 0; i < z.size(); ++i) {
        if (!z[i])
            continue;
        if (!swe[i]) {
            f[i] = true;
            continue;
        }
        if (*z[i] == 0.0 && *swe[i] == 0.0)
            continue;
        const double ratio = *swe[i] > 0.0 ? *z[i] / *swe[i] : HUGE_VAL;
        if (ratio < ratio_min || ratio > ratio_max)
            f[i] = true;
    }
    return f;
}

Flags qc_depth_hourly(std::span<const std::int64_t> time, const Column &z, const Column &swe,
                      const DepthQcOptions &options, AuditLog *audit)
{
    if (time.size() != z.size() || (!swe.empty() && swe.size() != z.size()))
        throw ShapeError("depth QC inputs differ in length");
    const std::size_t n = z.size();
    Flags flags(n, false);
    const double Z = options.jump;

    std::vector<CivilTime> civil(n);
    for (std::size_t i = 0; i < n; ++i)
        civil[i] = to_civil(time[i]);

    if (!swe.empty()) {
        const Flags r = ratio_filter(z, swe, options.ratio_min, options.ratio_max);
        for (std::size_t i = 0; i < n; ++i)
            flags[i] = flags[i] || r[i];
    } else if (audit) {
        audit->note("hourly depth ratio rule skipped: no hourly SWE");
    }

    int passes = 0;
    for (;;) {
        ++passes;
        std::vector<std::size_t> obs;
        for (std::size_t i = 0; i < n; ++i)
            if (z[i] && !flags[i])
                obs.push_back(i);
        const std::size_t m = obs.size();
        Flags fresh(n, false);
        auto zv = [&](std::size_t k) { return *z[obs[k]]; };
        auto dzm = [&](std::size_t k) { return zv(k) - zv(k - 1); };
        auto dzp = [&](std::size_t k) { return zv(k + 1) - zv(k); };

        bool spikes = false;
        for (std::size_t k = 1; k + 1 < m; ++k) {
            const double a = dzm(k), b = dzp(k);
            if ((a >= Z && b <= -Z) || (a <= -Z && b >= Z))
                spikes = fresh[obs[k]] = true;
        }
        // The recovery from a dip looks like a rut start; clear spikes first.
        if (spikes) {
            for (std::size_t i = 0; i < n; ++i)
                flags[i] = flags[i] || fresh[i];
            continue;
        }

        for (std::size_t k = 1; k + 1 < m;) {
            if (!(dzm(k) >= Z && std::abs(dzp(k)) <= Z)) {
                ++k;
                continue;
            }
            std::size_t j = k;
            bool long_gap = false;
            while (j + 1 < m && std::abs(dzp(j)) < Z) {
                long_gap = long_gap || time[obs[j + 1]] - time[obs[j]] > options.rut_max_gap;
                ++j;
            }
            if (j + 1 < m)
                long_gap = long_gap || time[obs[j + 1]] - time[obs[j]] > options.rut_max_gap;
            const std::size_t len = j - k + 1;
            if (len > options.rut_max_obs || long_gap) {
                std::size_t e = k;
                while (e < m && zv(e) != 0.0)
                    fresh[obs[e++]] = true;
                k = std::max(e, j + 1);
            } else {
                for (std::size_t e = k; e <= j; ++e)
                    fresh[obs[e]] = true;
                k = j + 1;
            }
        }

        int year = 0;
        bool reached_zero = false;
        for (std::size_t k = 0; k < m; ++k) {
            const CivilTime &c = civil[obs[k]];
            if (c.month < options.melt_first_month || c.month > options.melt_last_month)
                continue;
            if (c.year != year) {
                year = c.year;
                reached_zero = false;
            }
            if (zv(k) == 0.0)
                reached_zero = true;
            else if (reached_zero)
                fresh[obs[k]] = true;
        }

        std::size_t added = 0;
        for (std::size_t i = 0; i < n; ++i)
            if (fresh[i] && !flags[i]) {
                flags[i] = true;
                ++added;
            }
        if (added == 0)
            break;
    }
    if (audit) {
        audit->add("depth_flags", count_true(flags));
        audit->add("depth_qc_passes", static_cast<std::size_t>(passes));
    }
    return flags;
}

StationTable rollup_daily(const StationTable &hourly, Rollup rule)
{
    if (hourly.cadence != Cadence::hourly)
        throw InvalidConfiguration("rollup_daily needs an hourly table");
    if (hourly.size() == 0)
        throw DataError("empty hourly table");
    const std::int64_t first = floor_div(hourly.time.front(), seconds_per_day) * seconds_per_day;
    const std::int64_t last = floor_div(hourly.time.back(), seconds_per_day) * seconds_per_day;
    StationTable out = StationTable::grid(hourly.site, Cadence::daily, first, last);
    const std::size_t days = out.size();

    for (Variable v : {Variable::t_air, Variable::rh, Variable::solar, Variable::wind}) {
        if (!hourly.has(v))
            continue;
        std::vector<std::array<double, 3>> sum(days, {0.0, 0.0, 0.0});
        std::vector<std::array<std::size_t, 3>> cnt(days, {0, 0, 0});
        const Column &col = hourly[v];
        for (std::size_t i = 0; i < hourly.size(); ++i) {
            if (!col[i])
                continue;
            const auto d = static_cast<std::size_t>(floor_div(hourly.time[i] - first, seconds_per_day));
            const auto bin = static_cast<std::size_t>(floor_div(hourly.time[i], seconds_per_hour) % 24 / 8);
            sum[d][bin] += *col[i];
            ++cnt[d][bin];
        }
        Column &dst = out.ensure(v);
        for (std::size_t d = 0; d < days; ++d) {
            if (rule == Rollup::eight_hour_bins) {
                if (cnt[d][0] && cnt[d][1] && cnt[d][2]) {
                    double acc = 0.0;
                    for (std::size_t b = 0; b < 3; ++b)
                        acc += sum[d][b] / static_cast<double>(cnt[d][b]);
                    dst[d] = acc / 3.0;
                }
            } else {
                const std::size_t c = cnt[d][0] + cnt[d][1] + cnt[d][2];
                if (c)
                    dst[d] = (sum[d][0] + sum[d][1] + sum[d][2]) / static_cast<double>(c);
            }
        }
    }
    if (hourly.has(Variable::z)) {
        Column &dst = out.ensure(Variable::z);
        const Column &col = hourly[Variable::z];
        for (std::size_t i = 0; i < hourly.size(); ++i) {
            if (!col[i])
                continue;
            const auto d = static_cast<std::size_t>(floor_div(hourly.time[i] - first, seconds_per_day));
            if (!dst[d])
                dst[d] = col[i];
        }
    }
    return out;
}

Flags qc_solar_annual(std::span<const std::int64_t> time, const Column &solar, double threshold, AuditLog *audit)
{
    if (time.size() != solar.size())
        throw ShapeError("solar series and time differ in length");
    Flags flags(solar.size(), false);
    std::map<int, double> annual;
    for (std::size_t i = 0; i < solar.size(); ++i)
        if (solar[i]) {
            const int y = to_civil(time[i]).year;
            auto [it, fresh] = annual.try_emplace(y, *solar[i]);
            if (!fresh)
                it->second = std::max(it->second, *solar[i]);
        }
    if (annual.size() < 2) {
        if (audit)
            audit->note("solar annual-maximum QC skipped: fewer than two years");
        return flags;
    }
    std::vector<double> maxima;
    for (const auto &[y, m] : annual)
        maxima.push_back(m);
    const double med = median(maxima);
    const double iqr = quantile(maxima, 0.75) - quantile(maxima, 0.25);
    if (!(iqr > 0.0)) {
        if (audit)
            audit->note("solar annual-maximum QC skipped: zero IQR");
        return flags;
    }
    for (std::size_t i = 0; i < solar.size(); ++i)
        if (solar[i] && (*solar[i] - med) / iqr > threshold)
            flags[i] = true;
    if (audit)
        audit->add("solar_flags", count_true(flags));
    return flags;
}

StationTable coalesce_daily(const StationTable *daily, const StationTable *from_hourly, const SiteOverride &site)
{
    if (!daily && !from_hourly)
        throw DataError("nothing to coalesce");
    for (const StationTable *t : {daily, from_hourly})
        if (t && (t->cadence != Cadence::daily || t->size() == 0))
            throw DataError("coalesce needs non-empty daily tables");
    std::int64_t first = INT64_MAX, last = INT64_MIN;
    std::string name;
    for (const StationTable *t : {daily, from_hourly})
        if (t) {
            first = std::min(first, t->time.front());
            last = std::max(last, t->time.back());
            if (name.empty())
                name = t->site;
        }
    StationTable out = StationTable::grid(name, Cadence::daily, first, last);

    auto value = [&](const StationTable *t, Variable v, std::int64_t when) -> std::optional<double> {
        if (!t || !t->has(v) || when < t->time.front() || when > t->time.back())
            return std::nullopt;
        return (*t)[v][static_cast<std::size_t>((when - t->time.front()) / seconds_per_day)];
    };

    for (Variable v : all_variables) {
        const StationTable *primary = daily;
        const StationTable *secondary = from_hourly;
        if (v == Variable::solar || v == Variable::rh || v == Variable::wind ||
            (v == Variable::t_air && site.prefer_hourly_t_air))
            std::swap(primary, secondary);
        if (v == Variable::swe || v == Variable::ap)
            secondary = nullptr;
        const bool any = (primary && primary->has(v)) || (secondary && secondary->has(v));
        if (!any)
            continue;
        Column &dst = out.ensure(v);
        for (std::size_t i = 0; i < out.size(); ++i) {
            auto val = value(primary, v, out.time[i]);
            if (!val)
                val = value(secondary, v, out.time[i]);
            dst[i] = val;
        }
    }
    return out;
}

Column fill_linear(const Column &values, std::size_t max_steps, std::size_t *filled)
{
    Column out = values;
    std::size_t count = 0;
    const std::size_t n = values.size();
    std::size_t i = 0;
    while (i < n) {
        if (values[i]) {
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < n && !values[j])
            ++j;
        const std::size_t len = j - i;
        if (i > 0 && j < n && len <= max_steps) {
            const double a = *values[i - 1];
            const double b = *values[j];
            for (std::size_t k = i; k < j; ++k)
                out[k] = a + (b - a) * static_cast<double>(k - i + 1) / static_cast<double>(len + 1);
            count += len;
        }
        i = j;
    }
    if (filled)
        *filled = count;
    return out;
}

double snow_fraction(double t_air, double rh)
{
    return 1.0 / (1.0 + std::exp(snow_alpha + snow_beta * t_air + snow_gamma * rh));
}

std::vector<ProcessedRecord> derive_records(const StationTable &table, AuditLog *audit)
{
    for (Variable v : all_variables)
        if (!table.has(v))
            throw DataError(table.site + ": table lacks the '" + std::string(to_string(v)) + "' column");
    const double dt = static_cast<double>(step_seconds(table.cadence));
    auto complete = [&](std::size_t i) {
        for (Variable v : all_variables)
            if (!table[v][i])
                return false;
        return true;
    };
    std::vector<ProcessedRecord> out;
    std::size_t resets = 0;
    for (std::size_t i = 0; i + 1 < table.size(); ++i) {
        if (!complete(i) || !complete(i + 1))
            continue;
        ProcessedRecord r;
        r.site = table.site;
        r.time = table.time[i];
        r.z = *table[Variable::z][i];
        r.swe = *table[Variable::swe][i];
        r.rh = *table[Variable::rh][i];
        r.solar = *table[Variable::solar][i];
        r.wind = *table[Variable::wind][i];
        r.t_air = *table[Variable::t_air][i];
        double p = *table[Variable::ap][i + 1] - *table[Variable::ap][i];
        if (p < 0.0) {
            p = 0.0;
            ++resets;
        }
        r.precip = p / dt;
        r.f_snow = snow_fraction(r.t_air, r.rh);
        r.p_snow = r.f_snow * r.precip;
        r.p_rain = (1.0 - r.f_snow) * r.precip;
        r.dz_dt = (*table[Variable::z][i + 1] - r.z) / dt;
        r.dswe_dt = (*table[Variable::swe][i + 1] - r.swe) / dt;
        out.push_back(r);
    }
    if (audit) {
        audit->add("records", out.size());
        audit->add("water_year_reset", resets);
    }
    return out;
}

EngineeredSet engineer_features(const std::vector<ProcessedRecord> &records, int window, StateVariable target,
                                double dt)
{
    if (window < 1)
        throw InvalidConfiguration("window must be >= 1");
    EngineeredSet out;
    const auto N = static_cast<std::size_t>(window);
    const auto step = static_cast<std::int64_t>(std::llround(dt));
    constexpr double zero_tol = 1e-9; // m

    for (std::size_t i = 0; i + N <= records.size(); ++i) {
        const ProcessedRecord &s = records[i];
        bool contiguous = true;
        for (std::size_t j = 1; j < N && contiguous; ++j)
            contiguous = records[i + j].site == s.site &&
                         records[i + j].time == s.time + static_cast<std::int64_t>(j) * step;
        if (!contiguous)
            continue;
        ++out.windows;

        const ProcessedRecord &e = records[i + N - 1];
        const double z_end = e.z + e.dz_dt * dt;
        const double swe_end = e.swe + e.dswe_dt * dt;
        if (s.swe == 0.0 && s.z > 0.0) {
            ++out.dropped_unphysical;
            continue;
        }
        if (s.z == 0.0 && s.swe == 0.0 && std::abs(z_end) <= zero_tol && std::abs(swe_end) <= zero_tol) {
            ++out.dropped_no_snowpack;
            continue;
        }

        ModelInput in{s.z, s.swe, 0.0, 0.0, 0.0, 0.0, 0.0};
        double y = 0.0;
        for (std::size_t j = 0; j < N; ++j) {
            const ProcessedRecord &r = records[i + j];
            in.rh += r.rh;
            in.solar += r.solar;
            in.wind += r.wind;
            in.t_air += r.t_air;
            in.p_snow += r.p_snow;
            y += target == StateVariable::depth ? r.dz_dt : r.dswe_dt;
        }
        const double inv = 1.0 / static_cast<double>(N);
        in.rh *= inv;
        in.solar *= inv;
        in.wind *= inv;
        in.t_air *= inv;
        in.p_snow *= inv;
        y *= inv;
        const auto x = feature_vector(in, target);
        out.data.add(x, y, s.site);
    }
    if (!out.data.empty())
        out.scaling = compute_scaling(out.data);
    return out;
}

SiteSeries to_site_series(const std::vector<ProcessedRecord> &records, const std::string &site)
{
    SiteSeries s;
    s.site = site;
    for (const ProcessedRecord &r : records)
        if (r.site == site)
            s.records.push_back(ForcingRecord{r.time, r.z, r.swe, r.rh, r.solar, r.wind, r.t_air, r.p_snow});
    std::stable_sort(s.records.begin(), s.records.end(),
                     [](const ForcingRecord &a, const ForcingRecord &b) { return a.time < b.time; });
    return s;
}

std::vector<std::string> site_ids(const std::vector<ProcessedRecord> &records)
{
    std::vector<std::string> out;
    for (const ProcessedRecord &r : records)
        if (std::find(out.begin(), out.end(), r.site) == out.end())
            out.push_back(r.site);
    return out;
}

PipelineResult run_pipeline(const RawStation &raw, const PipelineOptions &options)
{
    PipelineResult result;
    AuditLog &audit = result.audit;
    const SiteOverride site = options.overrides.for_site(raw.site);

    std::optional<StationTable> from_hourly;
    if (raw.hourly) {
        StationTable h = *raw.hourly;
        if (h.cadence != Cadence::hourly)
            throw InvalidConfiguration("hourly input must have hourly cadence");
        if (h.has(Variable::wind)) {
            const Flags f = qc_wind(h.time, h[Variable::wind], options.wind, &audit);
            apply_flags(h[Variable::wind], f);
        }
        for (Variable v : {Variable::wind, Variable::solar, Variable::rh, Variable::t_air})
            if (h.has(v))
                h[v] = qc_fill_profiles(h.time, h[v], {}, options.fill, &audit);
        if (h.has(Variable::z)) {
            const Column none;
            const Flags f = qc_depth_hourly(h.time, h[Variable::z], h.has(Variable::swe) ? h[Variable::swe] : none,
                                            options.depth, &audit);
            apply_flags(h[Variable::z], f);
        }
        StationTable d = rollup_daily(h, options.rollup);
        if (d.has(Variable::solar)) {
            const Flags f = qc_solar_annual(d.time, d[Variable::solar], options.solar_threshold, &audit);
            apply_flags(d[Variable::solar], f);
        }
        from_hourly = std::move(d);
    }

    const StationTable *daily = raw.daily ? &*raw.daily : nullptr;
    if (daily && daily->cadence != Cadence::daily)
        throw InvalidConfiguration("daily input must have daily cadence");
    StationTable merged = coalesce_daily(daily, from_hourly ? &*from_hourly : nullptr, site);
    merged.site = raw.site;

    for (const auto &hook : {options.hooks.temperature_correction, options.hooks.swe_precip_qc,
                             options.hooks.undercatch})
        if (hook)
            hook(merged);

    if (merged.has(Variable::z)) {
        merged.ensure(Variable::swe);
        const Flags f = ratio_filter(merged[Variable::z], merged[Variable::swe], options.depth.ratio_min,
                                     options.depth.ratio_max);
        audit.add("ratio_filter", apply_flags(merged[Variable::z], f));
    }

    std::size_t filled_total = 0;
    for (Variable v : all_variables)
        if (merged.has(v)) {
            std::size_t filled = 0;
            merged[v] = fill_linear(merged[v], options.gap_fill_days, &filled);
            filled_total += filled;
        }
    audit.add("gap_fill", filled_total);

    for (Variable v : all_variables)
        if (!merged.has(v)) {
            merged.ensure(v);
            audit.note(raw.site + ": no '" + std::string(to_string(v)) + "' data");
        }
    result.records = derive_records(merged, &audit);
    if (result.records.empty())
        audit.note(raw.site + ": no complete cases");
    result.daily = std::move(merged);
    return result;
}

} // namespace snowode
