#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "snowode/io.hpp"
#include "snowode/metrics.hpp"
#include "snowode/pipeline.hpp"
#include "snowode/training.hpp"

namespace snowode {

/// One site's processed (unaveraged, unfiltered) records.
struct CvSite
{
    std::string site;
    std::vector<ProcessedRecord> records;
};

std::vector<CvSite> split_sites(const std::vector<ProcessedRecord> &records);

enum class CvScore { regression_rmse, series_rmse };

struct CvOptions
{
    double dt = 86400.0;
    StateVariable target = StateVariable::depth;
    ThresholdSpec spec = ThresholdSpec::snow();
    int eval_every = 10;
    CvScore score = CvScore::regression_rmse;
    SimulationOptions simulation;
};

struct CvFold
{
    std::string held_out;
    double regression_rmse = 0.0;          // m/s, held-out unaveraged records
    std::optional<MetricReport> series;    // depth simulation against observed z
};

/// Scores of one hyperparameter setting at one checkpoint epoch.
struct CvEntry
{
    Hyperparams hp;
    int epoch = 0;
    std::vector<CvFold> folds;
    double regression_rmse = 0.0; // fold mean
    std::optional<double> series_rmse;
    std::optional<double> nse;
    std::optional<double> spe;
    int rank = 0; // 1 = best
};

struct CvTable
{
    CvScore score = CvScore::regression_rmse;
    std::vector<CvEntry> entries; // sorted by rank
};

/// Unaveraged regression rows for every record, no filtering.
TrainingSet regression_rows(const std::vector<ProcessedRecord> &records, StateVariable target);

/// Each site held out once; training uses the others' windowed and filtered
/// rows, scoring uses the held-out site's raw records.
CvTable loo_cv(const std::vector<CvSite> &sites, const std::vector<Hyperparams> &grid, const CvOptions &options = {});

void write_cv_csv(std::ostream &out, const CvTable &table, const Metadata &meta);

} // namespace snowode
