// snowode: command-line front end for cleaning, training, simulation, evaluation and benchmarking.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "snowode/bench.hpp"
#include "snowode/cross_validation.hpp"
#include "snowode/csv.hpp"
#include "snowode/error.hpp"
#include "snowode/io.hpp"
#include "snowode/metrics.hpp"
#include "snowode/pipeline.hpp"
#include "snowode/synthetic.hpp"
#include "snowode/time.hpp"

namespace fs = std::filesystem;
using namespace snowode;

namespace {

enum Exit { ok = 0, failure = 1, usage = 2, bad_config = 3, bad_data = 4, bad_shape = 5, diverged = 6, io_error = 7 };

int report_error(const char *kind, const std::string &message, int code)
{
    nlohmann::json j{{"error", kind}, {"message", message}, {"exit_code", code}};
    std::cerr << j.dump() << '\n';
    return code;
}

std::string read_text(const std::string &path)
{
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::ofstream open_out(const std::string &path)
{
    if (const fs::path parent = fs::path(path).parent_path(); !parent.empty())
        fs::create_directories(parent);
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot write '" + path + "'");
    return out;
}

double step_of(const std::string &processed_path, std::optional<double> flag)
{
    if (flag)
        return *flag;
    const CsvDocument doc = read_csv_file(processed_path);
    if (const auto s = doc.meta("step_seconds"))
        return parse_double(*s);
    return 86400.0;
}

// SWE models use the depth constraints with the roles of z and SWE swapped;
// the snowfall-rate cap is opt-in because it stalls melt learning.
ThresholdSpec spec_for(StateVariable target, bool snowfall_cap)
{
    if (snowfall_cap && target != StateVariable::swe)
        throw InvalidConfiguration("--snowfall-cap applies to SWE models only");
    return snowfall_cap ? ThresholdSpec::snowfall_capped() : ThresholdSpec::snow();
}

std::vector<ProcessedRecord> only_sites(std::vector<ProcessedRecord> records, const std::vector<std::string> &keep,
                                        const std::vector<std::string> &drop)
{
    std::erase_if(records, [&](const ProcessedRecord &r) {
        if (!keep.empty() && std::find(keep.begin(), keep.end(), r.site) == keep.end())
            return true;
        return std::find(drop.begin(), drop.end(), r.site) != drop.end();
    });
    return records;
}

Metadata processed_meta(const std::string &kind, double step)
{
    Metadata m = artifact_metadata(kind);
    m.emplace_back("step_seconds", format_double(step));
    return m;
}

// ---- synth

struct SynthArgs
{
    int sites = 5;
    int years = 10;
    std::uint64_t seed = 1;
    int steps_per_day = 1;
    std::string noise = "gaussian";
    double noise_sd = 0.01;
    double gap_probability = 0.0;
    std::string out;
    std::string raw_dir;
};

void run_synth(const SynthArgs &a)
{
    std::vector<SyntheticOptions> corpus = synthetic_corpus(a.sites, a.seed, a.years, a.steps_per_day);
    std::vector<ProcessedRecord> all;
    for (SyntheticOptions &o : corpus) {
        o.noise = a.noise == "skewed" ? NoiseKind::skewed : NoiseKind::gaussian;
        if (a.noise != "skewed" && a.noise != "gaussian")
            throw InvalidConfiguration("noise must be 'gaussian' or 'skewed'");
        o.noise_sd = a.noise_sd;
        o.gap_probability = a.gap_probability;
        const SyntheticSite s = generate_site(o);
        const auto recs = derive_records(s.table);
        all.insert(all.end(), recs.begin(), recs.end());
        if (!a.raw_dir.empty()) {
            std::ofstream out = open_out((fs::path(a.raw_dir) / (o.site + ".csv")).string());
            Metadata m = artifact_metadata("synthetic-station");
            m.emplace_back("seed", std::to_string(o.seed));
            write_metadata(out, m);
            std::vector<std::string> header{"date"};
            for (Variable v : all_variables)
                header.emplace_back(to_string(v));
            write_row(out, header);
            for (std::size_t i = 0; i < s.table.size(); ++i) {
                std::vector<std::string> row{format_timestamp(s.table.time[i])};
                for (Variable v : all_variables)
                    row.push_back(format_optional(s.table[v][i]));
                write_row(out, row);
            }
        }
    }
    if (!a.raw_dir.empty()) {
        nlohmann::json schema{{"time_column", "date"},
                              {"cadence", a.steps_per_day == 1 ? "daily" : "hourly"},
                              {"columns", nlohmann::json::object()}};
        const char *units[] = {"m", "m", "m", "degC", "fraction", "W/m2", "m/s"};
        for (Variable v : all_variables)
            schema["columns"][std::string(to_string(v))] = {{"variable", to_string(v)},
                                                             {"unit", units[static_cast<int>(v)]}};
        open_out((fs::path(a.raw_dir) / "schema.json").string()) << schema.dump(2) << '\n';
    }
    Metadata m = processed_meta("processed", a.steps_per_day == 1 ? 86400.0 : 3600.0);
    m.emplace_back("seed", std::to_string(a.seed));
    m.emplace_back("noise", a.noise);
    std::ofstream out = open_out(a.out);
    write_processed_csv(out, all, m);
}

// ---- clean

struct CleanArgs
{
    std::vector<std::string> daily;
    std::vector<std::string> hourly;
    std::string daily_schema;
    std::string hourly_schema;
    std::string overrides;
    bool conus = false;
    std::string rollup = "eight_hour";
    std::string out;
    std::string audit;
};

void run_clean(const CleanArgs &a)
{
    if (a.daily.empty() && a.hourly.empty())
        throw InvalidConfiguration("clean needs at least one --daily or --hourly file");
    PipelineOptions options;
    options.overrides = a.conus ? OverrideTable::snotel_conus() : OverrideTable{};
    if (!a.overrides.empty())
        options.overrides = OverrideTable::load(a.overrides);
    if (a.rollup == "daily_mean")
        options.rollup = Rollup::daily_mean;
    else if (a.rollup != "eight_hour")
        throw InvalidConfiguration("rollup must be 'eight_hour' or 'daily_mean'");

    std::map<std::string, RawStation> stations;
    AuditLog parse_audit;
    auto load = [&](const std::vector<std::string> &paths, const std::string &schema_path, bool hourly) {
        if (paths.empty())
            return;
        if (schema_path.empty())
            throw InvalidConfiguration(std::string("--") + (hourly ? "hourly" : "daily") + "-schema is required");
        const StationSchema schema = StationSchema::load(schema_path);
        if ((schema.cadence == Cadence::hourly) != hourly)
            throw InvalidConfiguration("schema cadence does not match the file list");
        for (const std::string &p : paths) {
            const std::string site = fs::path(p).stem().string();
            RawStation &raw = stations[site];
            raw.site = site;
            StationTable t = parse_station_csv_file(p, schema, site, options.overrides.limits_for(site), parse_audit);
            (hourly ? raw.hourly : raw.daily) = std::move(t);
        }
    };
    load(a.daily, a.daily_schema, false);
    load(a.hourly, a.hourly_schema, true);

    std::vector<ProcessedRecord> all;
    AuditLog merged = parse_audit;
    for (const auto &[site, raw] : stations) {
        PipelineResult r = run_pipeline(raw, options);
        for (const auto &[rule, n] : r.audit.counts)
            merged.add(site + "/" + rule, n);
        for (const std::string &s : r.audit.notices)
            merged.note(site + ": " + s);
        all.insert(all.end(), r.records.begin(), r.records.end());
    }
    std::ofstream out = open_out(a.out);
    write_processed_csv(out, all, processed_meta("processed", 86400.0));
    if (!a.audit.empty()) {
        std::ofstream au = open_out(a.audit);
        write_audit_csv(au, merged, artifact_metadata("audit"));
    }
}

// ---- train

struct HpFlags
{
    std::string config;
    std::optional<int> N, n, batch_size, epochs;
    std::optional<double> n1, n2, learning_rate;
    std::optional<std::uint64_t> seed;

    void add_to(CLI::App *app)
    {
        app->add_option("--config", config, "Hyperparameter JSON (keys N, n, n1, n2, batch_size, epochs, "
                                            "learning_rate, rmsprop_rho, rmsprop_epsilon, seed)")
            ->check(CLI::ExistingFile);
        app->add_option("--window", N, "Moving-window length N (records)");
        app->add_option("--width", n, "Mixing-layer multiplier n");
        app->add_option("--n1", n1, "Error exponent");
        app->add_option("--n2", n2, "Magnitude exponent");
        app->add_option("--batch-size", batch_size, "Mini-batch size");
        app->add_option("--epochs", epochs, "Training epochs");
        app->add_option("--learning-rate", learning_rate, "RMSProp learning rate");
        app->add_option("--seed", seed, "Initialization and shuffle seed");
    }

    Hyperparams resolve() const
    {
        Hyperparams hp = config.empty() ? Hyperparams{} : hyperparams_from_json_text(read_text(config));
        if (N)
            hp.window_days = *N;
        if (n)
            hp.width_multiplier = *n;
        if (n1)
            hp.error_exponent = *n1;
        if (n2)
            hp.magnitude_exponent = *n2;
        if (batch_size)
            hp.batch_size = *batch_size;
        if (epochs)
            hp.epochs = *epochs;
        if (learning_rate)
            hp.learning_rate = *learning_rate;
        if (seed)
            hp.seed = *seed;
        hp.validate();
        return hp;
    }
};

struct TrainArgs
{
    std::string data;
    HpFlags hp;
    std::string target = "depth";
    std::string constraints = "active";
    std::string act1 = "relu";
    std::string act2 = "elu";
    std::optional<double> dt;
    std::vector<std::string> sites;
    std::vector<std::string> exclude;
    std::optional<int> checkpoint;
    bool snowfall_cap = false;
    std::string out;
    std::string log;
};

void run_train(const TrainArgs &a)
{
    const Hyperparams hp = a.hp.resolve();
    const StateVariable target = state_variable_from_string(a.target);
    const double dt = step_of(a.data, a.dt);
    const auto records = only_sites(read_processed_file(a.data), a.sites, a.exclude);
    const EngineeredSet set = engineer_features(records, hp.window_days, target, dt);
    if (set.data.empty())
        throw DataError("no training rows after windowing and filtering");

    TrainOptions opt;
    opt.dt = dt;
    opt.target = target;
    if (a.constraints == "post_hoc")
        opt.constraints = ConstraintTraining::post_hoc;
    else if (a.constraints != "active")
        throw InvalidConfiguration("constraints must be 'active' or 'post_hoc'");
    opt.init.act1 = activation_from_string(a.act1);
    opt.init.act2 = activation_from_string(a.act2);
    const TrainingRun run = train(set.data, hp, spec_for(target, a.snowfall_cap), opt);

    ConstrainedModel model = run.model;
    if (a.checkpoint) {
        const auto it = std::find_if(run.checkpoints.begin(), run.checkpoints.end(),
                                     [&](const Checkpoint &c) { return c.epoch == *a.checkpoint; });
        if (it == run.checkpoints.end())
            throw InvalidConfiguration("no checkpoint at epoch " + std::to_string(*a.checkpoint));
        model = run.model_at(*it);
    }
    Metadata meta = artifact_metadata("model");
    append_hyperparams(meta, hp);
    meta.emplace_back("target", std::string(to_string(target)));
    meta.emplace_back("training_rows", std::to_string(set.data.size()));
    save_model(a.out, model, meta);

    if (!a.log.empty()) {
        std::ofstream log = open_out(a.log);
        Metadata lm = artifact_metadata("training-log");
        append_hyperparams(lm, hp);
        lm.emplace_back("dropped_unphysical", std::to_string(set.dropped_unphysical));
        lm.emplace_back("dropped_no_snowpack", std::to_string(set.dropped_no_snowpack));
        write_metadata(log, lm);
        write_row(log, {"epoch", "loss", "checkpoint"});
        for (std::size_t e = 0; e < run.epoch_loss.size(); ++e) {
            const int epoch = static_cast<int>(e) + 1;
            const bool cp = std::any_of(run.checkpoints.begin(), run.checkpoints.end(),
                                        [&](const Checkpoint &c) { return c.epoch == epoch; });
            write_row(log, {std::to_string(epoch), format_double(run.epoch_loss[e]), cp ? "1" : "0"});
        }
    }
}

// ---- cv

struct CvArgs
{
    std::string data;
    std::string grid;
    std::string target = "depth";
    std::string score = "regression_rmse";
    int eval_every = 10;
    std::optional<double> dt;
    int k_max = 5;
    bool snowfall_cap = false;
    std::string out;
};

void run_cv(const CvArgs &a)
{
    const std::vector<Hyperparams> grid =
        a.grid.empty() ? std::vector<Hyperparams>{Hyperparams{}} : grid_from_json_text(read_text(a.grid));
    CvOptions opt;
    opt.dt = step_of(a.data, a.dt);
    opt.target = state_variable_from_string(a.target);
    opt.spec = spec_for(opt.target, a.snowfall_cap);
    opt.eval_every = a.eval_every;
    opt.simulation.k_max = a.k_max;
    if (a.score == "series_rmse")
        opt.score = CvScore::series_rmse;
    else if (a.score != "regression_rmse")
        throw InvalidConfiguration("score must be 'regression_rmse' or 'series_rmse'");
    const CvTable table = loo_cv(split_sites(read_processed_file(a.data)), grid, opt);
    Metadata meta = artifact_metadata("cv");
    meta.emplace_back("grid_size", std::to_string(grid.size()));
    meta.emplace_back("target", a.target);
    std::ofstream out = open_out(a.out);
    write_cv_csv(out, table, meta);
}

// ---- simulate

struct SimulateArgs
{
    std::string data;
    std::string model;
    std::string swe_model;
    std::vector<std::string> sites;
    int k_max = 5;
    std::optional<double> dt;
    std::string out_dir;
};

void run_simulate(const SimulateArgs &a)
{
    ConstrainedModel mz = load_model(a.model);
    if (mz.target() != StateVariable::depth)
        throw InvalidConfiguration("--model must be a depth model");
    std::optional<ConstrainedModel> ms;
    if (!a.swe_model.empty()) {
        ms = load_model(a.swe_model);
        if (ms->target() != StateVariable::swe)
            throw InvalidConfiguration("--swe-model must be an SWE model");
    }
    const double dt = step_of(a.data, a.dt);
    if (dt != mz.dt())
        mz = rescale_dt(mz, dt);
    if (ms && dt != ms->dt())
        ms = rescale_dt(*ms, dt);

    const auto records = read_processed_file(a.data);
    const std::vector<std::string> sites = a.sites.empty() ? site_ids(records) : a.sites;
    SimulationOptions opt;
    opt.k_max = a.k_max;
    fs::create_directories(a.out_dir);
    for (const std::string &site : sites) {
        const SiteSeries series = to_site_series(records, site);
        if (series.records.empty())
            throw DataError("no records for site " + site);
        const SimulationResult r = ms ? simulate_coupled(series, mz, *ms, opt) : simulate_depth(series, mz, opt);
        Metadata meta = artifact_metadata("simulation");
        meta.emplace_back("mode", ms ? "coupled" : "depth");
        meta.emplace_back("model", a.model);
        meta.emplace_back("dt", format_double(dt));
        meta.emplace_back("k_max", std::to_string(a.k_max));
        meta.emplace_back("resets", std::to_string(r.resets.size()));
        meta.emplace_back("reset_fraction", format_double(r.reset_fraction()));
        meta.emplace_back("clamps", std::to_string(r.clamps.size()));
        write_simulation_file((fs::path(a.out_dir) / (site + ".csv")).string(), simulation_table(r, series), meta);
    }
}

// ---- evaluate

struct EvaluateArgs
{
    std::vector<std::string> sims;
    std::vector<std::string> baselines;
    std::string out;
    std::string wilcoxon;
    std::string density;
};

bool any_value(const std::vector<std::optional<double>> &v)
{
    return std::any_of(v.begin(), v.end(), [](const auto &x) { return x.has_value(); });
}

std::vector<MetricRow> table_metrics(const SimulationTable &t, const std::string &series)
{
    std::vector<MetricRow> rows{{t.site, "z", series, compute_metrics(t.z_obs, t.z_hat)}};
    if (any_value(t.swe_hat))
        rows.push_back({t.site, "swe", series, compute_metrics(t.swe_obs, t.swe_hat)});
    return rows;
}

void run_evaluate(const EvaluateArgs &a)
{
    std::vector<MetricRow> rows;
    std::map<std::string, std::vector<MetricRow>> model_rows, base_rows;
    std::ofstream dens;
    if (!a.density.empty()) {
        dens = open_out(a.density);
        write_metadata(dens, artifact_metadata("density"));
        write_row(dens, {"site", "series", "n", "rmse_pct", "bias_pct", "mpe_pct", "false_snowpacks",
                         "false_non_snowpacks", "unphysical", "scored"});
    }
    auto handle = [&](const std::string &path, const std::string &series,
                      std::map<std::string, std::vector<MetricRow>> &by_site) {
        const SimulationTable t = read_simulation_file(path);
        for (MetricRow &r : table_metrics(t, series)) {
            by_site[t.site].push_back(r);
            rows.push_back(std::move(r));
        }
        if (dens.is_open()) {
            const auto &swe_model = any_value(t.swe_hat) ? t.swe_hat : t.swe_obs;
            const DensityComparison d = derive_density(t.z_hat, swe_model, t.z_obs, t.swe_obs);
            const DensityMetrics m = density_metrics(d);
            write_row(dens, {t.site, series, std::to_string(m.n), format_optional(m.rmse_pct),
                             format_optional(m.bias_pct), format_optional(m.mpe_pct),
                             std::to_string(d.tallies.false_snowpacks), std::to_string(d.tallies.false_non_snowpacks),
                             std::to_string(d.tallies.unphysical_density_points),
                             std::to_string(d.tallies.scored_points)});
        }
    };
    for (const std::string &p : a.sims)
        handle(p, "model", model_rows);
    for (const std::string &p : a.baselines)
        handle(p, "baseline", base_rows);
    std::ofstream out = open_out(a.out);
    write_metrics_csv(out, rows, artifact_metadata("metrics"));

    if (a.baselines.empty())
        return;
    if (a.wilcoxon.empty())
        throw InvalidConfiguration("--wilcoxon output is required with --baseline");
    std::ofstream w = open_out(a.wilcoxon);
    write_metadata(w, artifact_metadata("wilcoxon"));
    write_row(w, {"variable", "metric", "n_pairs", "n_nonzero", "w_plus", "w_minus", "z", "p_value", "exact",
                  "median_difference"});
    using Getter = std::optional<double> (*)(const MetricReport &);
    const std::pair<const char *, Getter> metrics[] = {
        {"rmse", [](const MetricReport &r) { return std::optional<double>(r.rmse); }},
        {"mae", [](const MetricReport &r) { return std::optional<double>(r.mae); }},
        {"abs_bias", [](const MetricReport &r) { return std::optional<double>(std::abs(r.bias)); }},
        {"spe", [](const MetricReport &r) { return r.spe; }},
        {"nse", [](const MetricReport &r) { return r.nse; }}};
    for (const char *var : {"z", "swe"})
        for (const auto &[name, get] : metrics) {
            std::vector<double> m, b;
            for (const auto &[site, mr] : model_rows) {
                const auto it = base_rows.find(site);
                if (it == base_rows.end())
                    continue;
                std::optional<double> mv, bv;
                for (const MetricRow &r : mr)
                    if (r.variable == var)
                        mv = get(r.report);
                for (const MetricRow &r : it->second)
                    if (r.variable == var)
                        bv = get(r.report);
                if (mv && bv) {
                    m.push_back(*mv);
                    b.push_back(*bv);
                }
            }
            if (m.empty())
                continue;
            const WilcoxonResult res = wilcoxon_signed_rank(m, b);
            std::vector<double> diff(m.size());
            for (std::size_t i = 0; i < m.size(); ++i)
                diff[i] = m[i] - b[i];
            write_row(w, {var, name, std::to_string(res.n_pairs), std::to_string(res.n_nonzero),
                          format_double(res.w_plus), format_double(res.w_minus), format_optional(res.z),
                          format_double(res.p_value), res.exact ? "1" : "0", format_double(median(diff))});
        }
}

// ---- ale / slice

struct AleArgs
{
    std::string model;
    std::string data;
    std::vector<std::string> features;
    int bins = 20;
    std::size_t min_bin = 50;
    std::optional<double> dt;
    std::string out;
};

TrainingSet model_rows(const ConstrainedModel &model, const std::string &data, std::optional<double> dt)
{
    const EngineeredSet set =
        engineer_features(read_processed_file(data), 1, model.target(), step_of(data, dt));
    if (set.data.empty())
        throw DataError("no rows to evaluate");
    return set.data;
}

int feature_index(StateVariable target, const std::string &name)
{
    const auto names = feature_names(target);
    for (std::size_t i = 0; i < names.size(); ++i)
        if (names[i] == name)
            return static_cast<int>(i);
    throw InvalidConfiguration("unknown feature '" + name + "'");
}

void run_ale(const AleArgs &a)
{
    const ConstrainedModel model = load_model(a.model);
    const TrainingSet rows = model_rows(model, a.data, a.dt);
    std::vector<int> features;
    for (const std::string &f : a.features)
        features.push_back(feature_index(model.target(), f));
    if (features.empty())
        for (int i = 0; i < model.input_count(); ++i)
            features.push_back(i);
    const ScalarModel fn = [&](std::span<const double> x) { return model.rate(x); };
    std::vector<AleCurve> curves;
    for (int f : features) {
        AleCurve c = ale_first_order(fn, rows, f, AleOptions{a.bins, a.min_bin});
        c.name = std::string(feature_names(model.target())[static_cast<std::size_t>(f)]);
        curves.push_back(std::move(c));
    }
    Metadata meta = artifact_metadata("ale");
    meta.emplace_back("model", a.model);
    meta.emplace_back("bins", std::to_string(a.bins));
    meta.emplace_back("min_bin", std::to_string(a.min_bin));
    std::ofstream out = open_out(a.out);
    write_ale_csv(out, curves, meta);
}

struct SliceArgs
{
    std::string model;
    std::string data;
    std::string x, y; // name:min:max:count
    std::vector<std::string> fixed; // name=value
    std::optional<double> dt;
    std::string out;
};

struct Axis
{
    int feature = 0;
    double lo = 0.0, hi = 0.0;
    int count = 0;
};

Axis parse_axis(StateVariable target, const std::string &spec)
{
    std::vector<std::string> parts;
    std::stringstream ss(spec);
    for (std::string p; std::getline(ss, p, ':');)
        parts.push_back(p);
    if (parts.size() != 4)
        throw InvalidConfiguration("axis must be name:min:max:count, got '" + spec + "'");
    Axis ax{feature_index(target, parts[0]), parse_double(parts[1]), parse_double(parts[2]),
            static_cast<int>(parse_double(parts[3]))};
    if (ax.count < 2 || !(ax.hi > ax.lo))
        throw InvalidConfiguration("axis '" + spec + "' needs min < max and count >= 2");
    return ax;
}

void run_slice(const SliceArgs &a)
{
    const ConstrainedModel model = load_model(a.model);
    const StateVariable target = model.target();
    const Axis ax = parse_axis(target, a.x), ay = parse_axis(target, a.y);
    if (ax.feature == ay.feature)
        throw InvalidConfiguration("slice axes must be different features");
    std::vector<std::optional<double>> base(static_cast<std::size_t>(model.input_count()));
    if (!a.data.empty()) {
        const TrainingSet rows = model_rows(model, a.data, a.dt);
        for (int f = 0; f < model.input_count(); ++f) {
            std::vector<double> col(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i)
                col[i] = rows.row(i)[static_cast<std::size_t>(f)];
            base[static_cast<std::size_t>(f)] = median(col);
        }
    }
    for (const std::string &kv : a.fixed) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos)
            throw InvalidConfiguration("--fix expects name=value, got '" + kv + "'");
        base[static_cast<std::size_t>(feature_index(target, kv.substr(0, eq)))] = parse_double(kv.substr(eq + 1));
    }
    std::vector<double> x(base.size());
    for (std::size_t f = 0; f < base.size(); ++f) {
        if (static_cast<int>(f) == ax.feature || static_cast<int>(f) == ay.feature)
            continue;
        if (!base[f])
            throw InvalidConfiguration("feature '" + std::string(feature_names(target)[f]) +
                                       "' has no value; pass --data or --fix");
        x[f] = *base[f];
    }
    Metadata meta = artifact_metadata("slice");
    meta.emplace_back("model", a.model);
    for (std::size_t f = 0; f < base.size(); ++f)
        if (static_cast<int>(f) != ax.feature && static_cast<int>(f) != ay.feature)
            meta.emplace_back(std::string(feature_names(target)[f]), format_double(x[f]));
    std::ofstream out = open_out(a.out);
    write_metadata(out, meta);
    const auto names = feature_names(target);
    write_row(out, {std::string(names[static_cast<std::size_t>(ax.feature)]),
                    std::string(names[static_cast<std::size_t>(ay.feature)]), "p", "rate"});
    for (int i = 0; i < ax.count; ++i)
        for (int j = 0; j < ay.count; ++j) {
            x[static_cast<std::size_t>(ax.feature)] = ax.lo + (ax.hi - ax.lo) * i / (ax.count - 1);
            x[static_cast<std::size_t>(ay.feature)] = ay.lo + (ay.hi - ay.lo) * j / (ay.count - 1);
            write_row(out, {format_double(x[static_cast<std::size_t>(ax.feature)]),
                            format_double(x[static_cast<std::size_t>(ay.feature)]),
                            format_double(model.raw_prediction(x)), format_double(model.rate(x))});
        }
}

// ---- bench

struct BenchArgs
{
    std::string model;
    std::string data;
    std::vector<int> replications{14, 141};
    int passes = 10;
    int trials = 250;
    std::size_t chunk = 8192;
    std::vector<std::string> variants{"constrained", "constrained_algebraic", "ifelse"};
    std::optional<double> dt;
    std::string out;
};

void run_bench(const BenchArgs &a)
{
    const ConstrainedModel model = load_model(a.model);
    const TrainingSet rows = model_rows(model, a.data, a.dt);
    BenchOptions opt;
    opt.replications = a.replications;
    opt.column_passes = a.passes;
    opt.grid_trials = a.trials;
    opt.chunk = a.chunk;
    opt.variants.clear();
    for (const std::string &v : a.variants)
        opt.variants.push_back(bench_variant_from_string(v));
    const BenchReport report = bench(model, rows, opt);
    std::cout << format_bench_table(report);
    if (!a.out.empty()) {
        Metadata meta = artifact_metadata("bench");
        meta.emplace_back("model", a.model);
        meta.emplace_back("chunk", std::to_string(a.chunk));
        std::ofstream out = open_out(a.out);
        write_bench_csv(out, report, meta);
    }
}

} // namespace

int main(int argc, char **argv)
{
    CLI::App app{"Constrained neural-ODE snow depth parameterization"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(snowode_version));

    SynthArgs synth;
    auto *c_synth = app.add_subcommand("synth", "Generate a synthetic processed corpus");
    c_synth->add_option("--sites", synth.sites, "Number of sites")->capture_default_str();
    c_synth->add_option("--years", synth.years, "Years per site")->capture_default_str();
    c_synth->add_option("--seed", synth.seed, "Corpus seed")->capture_default_str();
    c_synth->add_option("--steps-per-day", synth.steps_per_day, "1 (daily) or 24 (hourly)")->capture_default_str();
    c_synth->add_option("--noise", synth.noise, "gaussian or skewed")->capture_default_str();
    c_synth->add_option("--noise-sd", synth.noise_sd, "Depth observation noise (m)")->capture_default_str();
    c_synth->add_option("--gap-probability", synth.gap_probability, "Daily chance of a data gap")
        ->capture_default_str();
    c_synth->add_option("--raw-dir", synth.raw_dir, "Also write station CSVs and a schema here");
    c_synth->add_option("--out", synth.out, "Processed CSV")->required();

    CleanArgs clean;
    auto *c_clean = app.add_subcommand("clean", "Quality-control raw station CSVs into a processed table");
    c_clean->add_option("--daily", clean.daily, "Daily station CSVs (site = file stem)")->check(CLI::ExistingFile);
    c_clean->add_option("--hourly", clean.hourly, "Hourly station CSVs (site = file stem)")->check(CLI::ExistingFile);
    c_clean->add_option("--daily-schema", clean.daily_schema, "Schema JSON for daily files")->check(CLI::ExistingFile);
    c_clean->add_option("--hourly-schema", clean.hourly_schema, "Schema JSON for hourly files")
        ->check(CLI::ExistingFile);
    c_clean->add_option("--overrides", clean.overrides, "Site override JSON")->check(CLI::ExistingFile);
    c_clean->add_flag("--snotel-conus", clean.conus, "Use the CONUS SNOTEL overrides");
    c_clean->add_option("--rollup", clean.rollup, "eight_hour or daily_mean")->capture_default_str();
    c_clean->add_option("--out", clean.out, "Processed CSV")->required();
    c_clean->add_option("--audit", clean.audit, "Audit CSV");

    TrainArgs tr;
    auto *c_train = app.add_subcommand("train", "Train a constrained model");
    c_train->add_option("--data", tr.data, "Processed CSV")->required()->check(CLI::ExistingFile);
    tr.hp.add_to(c_train);
    c_train->add_option("--target", tr.target, "depth or swe")->capture_default_str();
    c_train->add_option("--constraints", tr.constraints, "active or post_hoc")->capture_default_str();
    c_train->add_option("--act1", tr.act1, "Mixing-layer activation")->capture_default_str();
    c_train->add_option("--act2", tr.act2, "Contraction-layer activation")->capture_default_str();
    c_train->add_option("--dt", tr.dt, "Record step in seconds (default from the data header)");
    c_train->add_option("--site", tr.sites, "Train on these sites only");
    c_train->add_option("--exclude-site", tr.exclude, "Leave these sites out");
    c_train->add_option("--checkpoint", tr.checkpoint, "Save the checkpoint at this epoch instead of the last");
    c_train->add_flag("--snowfall-cap", tr.snowfall_cap, "SWE only: cap the tendency at the snowfall rate");
    c_train->add_option("--out", tr.out, "Model JSON")->required();
    c_train->add_option("--log", tr.log, "Training log CSV");

    CvArgs cv;
    auto *c_cv = app.add_subcommand("cv", "Leave-one-site-out hyperparameter search");
    c_cv->add_option("--data", cv.data, "Processed CSV")->required()->check(CLI::ExistingFile);
    c_cv->add_option("--grid", cv.grid, "Grid JSON")->check(CLI::ExistingFile);
    c_cv->add_option("--target", cv.target, "depth or swe")->capture_default_str();
    c_cv->add_option("--score", cv.score, "regression_rmse or series_rmse")->capture_default_str();
    c_cv->add_option("--eval-every", cv.eval_every, "Checkpoint spacing in epochs")->capture_default_str();
    c_cv->add_option("--k-max", cv.k_max, "Largest gap bridged without reset")->capture_default_str();
    c_cv->add_option("--dt", cv.dt, "Record step in seconds");
    c_cv->add_flag("--snowfall-cap", cv.snowfall_cap, "SWE only: cap the tendency at the snowfall rate");
    c_cv->add_option("--out", cv.out, "CV CSV")->required();

    SimulateArgs sim;
    auto *c_sim = app.add_subcommand("simulate", "Run Euler simulations per site");
    c_sim->add_option("--data", sim.data, "Processed CSV")->required()->check(CLI::ExistingFile);
    c_sim->add_option("--model", sim.model, "Depth model JSON")->required()->check(CLI::ExistingFile);
    c_sim->add_option("--swe-model", sim.swe_model, "SWE model JSON; enables coupled mode")
        ->check(CLI::ExistingFile);
    c_sim->add_option("--site", sim.sites, "Sites to simulate (default all)");
    c_sim->add_option("--k-max", sim.k_max, "Largest gap bridged without reset")->capture_default_str();
    c_sim->add_option("--dt", sim.dt, "Step in seconds; models are rescaled when it differs");
    c_sim->add_option("--out-dir", sim.out_dir, "Directory for <site>.csv")->required();

    EvaluateArgs ev;
    auto *c_eval = app.add_subcommand("evaluate", "Metrics and paired tests for simulation outputs");
    c_eval->add_option("--sim", ev.sims, "Simulation CSVs")->required()->check(CLI::ExistingFile);
    c_eval->add_option("--baseline", ev.baselines, "Baseline simulation CSVs, matched by site")
        ->check(CLI::ExistingFile);
    c_eval->add_option("--out", ev.out, "Metrics CSV")->required();
    c_eval->add_option("--wilcoxon", ev.wilcoxon, "Wilcoxon CSV");
    c_eval->add_option("--density", ev.density, "Bulk-density CSV");

    AleArgs ale;
    auto *c_ale = app.add_subcommand("ale", "First-order accumulated local effects");
    c_ale->add_option("--model", ale.model, "Model JSON")->required()->check(CLI::ExistingFile);
    c_ale->add_option("--data", ale.data, "Processed CSV")->required()->check(CLI::ExistingFile);
    c_ale->add_option("--feature", ale.features, "Feature names (default all)");
    c_ale->add_option("--bins", ale.bins, "Quantile bins")->capture_default_str();
    c_ale->add_option("--min-bin", ale.min_bin, "Minimum samples per bin")->capture_default_str();
    c_ale->add_option("--dt", ale.dt, "Record step in seconds");
    c_ale->add_option("--out", ale.out, "ALE CSV")->required();

    SliceArgs sl;
    auto *c_slice = app.add_subcommand("slice", "Model output on a grid of two features");
    c_slice->add_option("--model", sl.model, "Model JSON")->required()->check(CLI::ExistingFile);
    c_slice->add_option("--x", sl.x, "name:min:max:count")->required();
    c_slice->add_option("--y", sl.y, "name:min:max:count")->required();
    c_slice->add_option("--data", sl.data, "Processed CSV; other features held at their medians")
        ->check(CLI::ExistingFile);
    c_slice->add_option("--fix", sl.fixed, "name=value for a held feature");
    c_slice->add_option("--dt", sl.dt, "Record step in seconds");
    c_slice->add_option("--out", sl.out, "Grid CSV")->required();

    BenchArgs bn;
    auto *c_bench = app.add_subcommand("bench", "Time and memory of constrained and if/else variants");
    c_bench->add_option("--model", bn.model, "Model JSON")->required()->check(CLI::ExistingFile);
    c_bench->add_option("--data", bn.data, "Processed CSV")->required()->check(CLI::ExistingFile);
    c_bench->add_option("--replications", bn.replications, "Grid replication factors; 0 = column only")
        ->capture_default_str();
    c_bench->add_option("--passes", bn.passes, "Column-mode passes")->capture_default_str();
    c_bench->add_option("--trials", bn.trials, "Grid-mode trials")->capture_default_str();
    c_bench->add_option("--chunk", bn.chunk, "Grid columns per batch")->capture_default_str();
    c_bench->add_option("--variant", bn.variants, "constrained, constrained_algebraic, ifelse")
        ->capture_default_str();
    c_bench->add_option("--dt", bn.dt, "Record step in seconds");
    c_bench->add_option("--out", bn.out, "Bench CSV");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError &e) {
        if (e.get_exit_code() == 0)
            return app.exit(e);
        return report_error("usage", e.what(), usage);
    }

    try {
        if (*c_synth)
            run_synth(synth);
        else if (*c_clean)
            run_clean(clean);
        else if (*c_train)
            run_train(tr);
        else if (*c_cv)
            run_cv(cv);
        else if (*c_sim)
            run_simulate(sim);
        else if (*c_eval)
            run_evaluate(ev);
        else if (*c_ale)
            run_ale(ale);
        else if (*c_slice)
            run_slice(sl);
        else if (*c_bench)
            run_bench(bn);
    } catch (const InvalidConfiguration &e) {
        return report_error("invalid_configuration", e.what(), bad_config);
    } catch (const DataError &e) {
        return report_error("data_error", e.what(), bad_data);
    } catch (const ShapeError &e) {
        return report_error("shape_error", e.what(), bad_shape);
    } catch (const InconsistentBounds &e) {
        return report_error("inconsistent_bounds", e.what(), bad_shape);
    } catch (const TrainingDiverged &e) {
        return report_error("training_diverged", e.what(), diverged);
    } catch (const fs::filesystem_error &e) {
        return report_error("io_error", e.what(), io_error);
    } catch (const std::exception &e) {
        return report_error("error", e.what(), failure);
    }
    return ok;
}
