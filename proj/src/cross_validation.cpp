#include "snowode/cross_validation.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "snowode/csv.hpp"
#include "snowode/error.hpp"

namespace snowode {

std::vector<CvSite> split_sites(const std::vector<ProcessedRecord> &records)
{
    std::vector<CvSite> out;
    for (const std::string &id : site_ids(records)) {
        CvSite s{id, {}};
        for (const ProcessedRecord &r : records)
            if (r.site == id)
                s.records.push_back(r);
        out.push_back(std::move(s));
    }
    return out;
}

TrainingSet regression_rows(const std::vector<ProcessedRecord> &records, StateVariable target)
{
    TrainingSet out;
    for (const ProcessedRecord &r : records) {
        const ModelInput in{r.z, r.swe, r.rh, r.solar, r.wind, r.t_air, r.p_snow};
        out.add(feature_vector(in, target), target == StateVariable::depth ? r.dz_dt : r.dswe_dt, r.site);
    }
    return out;
}

namespace {

double regression_rmse(const ConstrainedModel &model, const TrainingSet &rows)
{
    double ss = 0.0;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        const double e = model.rate(rows.row(i)) - rows.targets[i];
        ss += e * e;
    }
    return std::sqrt(ss / static_cast<double>(rows.size()));
}

std::optional<double> mean_of(const std::vector<std::optional<double>> &v)
{
    double s = 0.0;
    for (const auto &x : v) {
        if (!x)
            return std::nullopt;
        s += *x;
    }
    return v.empty() ? std::nullopt : std::optional<double>(s / static_cast<double>(v.size()));
}

} // namespace

CvTable loo_cv(const std::vector<CvSite> &sites, const std::vector<Hyperparams> &grid, const CvOptions &options)
{
    if (sites.size() < 2)
        throw InvalidConfiguration("cross-validation needs at least 2 sites");
    if (grid.empty())
        throw InvalidConfiguration("hyperparameter grid is empty");
    if (options.eval_every < 1)
        throw InvalidConfiguration("eval_every must be >= 1");

    CvTable table;
    table.score = options.score;
    for (const Hyperparams &hp : grid) {
        hp.validate();
        std::vector<CvEntry> per_epoch;
        for (std::size_t h = 0; h < sites.size(); ++h) {
            TrainingSet train_rows;
            for (std::size_t s = 0; s < sites.size(); ++s)
                if (s != h)
                    train_rows.append(engineer_features(sites[s].records, hp.window_days, options.target, options.dt).data);
            if (train_rows.empty())
                throw DataError("no training rows left when holding out site " + sites[h].site);
            const TrainingSet held = regression_rows(sites[h].records, options.target);
            if (held.empty())
                throw DataError("held-out site " + sites[h].site + " has no records");
            const SiteSeries series = to_site_series(sites[h].records, sites[h].site);

            TrainOptions topt;
            topt.dt = options.dt;
            topt.target = options.target;
            topt.checkpoint_every = options.eval_every;
            const TrainingRun run = train(train_rows, hp, options.spec, topt);

            if (per_epoch.empty())
                for (const Checkpoint &c : run.checkpoints)
                    per_epoch.push_back(CvEntry{hp, c.epoch, {}, 0.0, {}, {}, {}, 0});
            for (std::size_t c = 0; c < run.checkpoints.size(); ++c) {
                const ConstrainedModel model = run.model_at(run.checkpoints[c]);
                CvFold fold{sites[h].site, regression_rmse(model, held), std::nullopt};
                if (options.target == StateVariable::depth) {
                    const SimulationResult sim = simulate_depth(series, model, options.simulation);
                    fold.series = compute_metrics(observed_z(series), sim.z_hat);
                }
                per_epoch[c].folds.push_back(std::move(fold));
            }
        }
        for (CvEntry &e : per_epoch) {
            std::vector<std::optional<double>> rmse, nse, spe;
            double reg = 0.0;
            for (const CvFold &f : e.folds) {
                reg += f.regression_rmse;
                rmse.push_back(f.series ? std::optional<double>(f.series->rmse) : std::nullopt);
                nse.push_back(f.series ? f.series->nse : std::nullopt);
                spe.push_back(f.series ? f.series->spe : std::nullopt);
            }
            e.regression_rmse = reg / static_cast<double>(e.folds.size());
            e.series_rmse = mean_of(rmse);
            e.nse = mean_of(nse);
            e.spe = mean_of(spe);
            table.entries.push_back(std::move(e));
        }
    }

    auto key = [&](const CvEntry &e) {
        if (options.score == CvScore::series_rmse)
            return e.series_rmse.value_or(HUGE_VAL);
        return e.regression_rmse;
    };
    std::stable_sort(table.entries.begin(), table.entries.end(),
                     [&](const CvEntry &a, const CvEntry &b) { return key(a) < key(b); });
    for (std::size_t i = 0; i < table.entries.size(); ++i)
        table.entries[i].rank = static_cast<int>(i) + 1;
    return table;
}

void write_cv_csv(std::ostream &out, const CvTable &table, const Metadata &meta)
{
    write_metadata(out, meta);
    out << "# score: " << (table.score == CvScore::series_rmse ? "series_rmse" : "regression_rmse") << '\n';
    write_row(out, {"rank", "N", "n", "n1", "n2", "batch_size", "epochs", "learning_rate", "seed", "epoch", "fold",
                    "regression_rmse", "series_rmse", "nse", "spe"});
    for (const CvEntry &e : table.entries) {
        const Hyperparams &hp = e.hp;
        auto base = [&](const std::string &fold) {
            return std::vector<std::string>{std::to_string(e.rank), std::to_string(hp.window_days),
                                            std::to_string(hp.width_multiplier), format_double(hp.error_exponent),
                                            format_double(hp.magnitude_exponent), std::to_string(hp.batch_size),
                                            std::to_string(hp.epochs), format_double(hp.learning_rate),
                                            std::to_string(hp.seed), std::to_string(e.epoch), fold};
        };
        auto row = base("mean");
        row.insert(row.end(), {format_double(e.regression_rmse), format_optional(e.series_rmse),
                               format_optional(e.nse), format_optional(e.spe)});
        write_row(out, row);
        for (const CvFold &f : e.folds) {
            auto fr = base(f.held_out);
            const auto &s = f.series;
            fr.insert(fr.end(), {format_double(f.regression_rmse),
                                 format_optional(s ? std::optional<double>(s->rmse) : std::nullopt),
                                 format_optional(s ? s->nse : std::nullopt), format_optional(s ? s->spe : std::nullopt)});
            write_row(out, fr);
        }
    }
}

} // namespace snowode
