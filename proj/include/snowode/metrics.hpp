#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "snowode/simulation.hpp"
#include "snowode/training.hpp"

namespace snowode {

/// Type-7 (linear interpolation) sample quantile, q in [0, 1].
double quantile(std::vector<double> values, double q);
double median(std::vector<double> values);

struct MetricReport
{
    std::size_t n = 0;
    double rmse = 0.0;
    double mae = 0.0;
    double bias = 0.0;                 // mean(predicted - observed)
    std::optional<double> mpe;         // median |o - p| / |o| over o != 0, fraction
    std::optional<double> nse;         // missing when observations have zero variance
    std::optional<double> spe;         // MAE / mean of nonzero observations, fraction
    std::optional<double> pearson_r;
};

MetricReport compute_metrics(std::span<const double> observed, std::span<const double> predicted);

/// Pairs where both sides are present.
MetricReport compute_metrics(const std::vector<std::optional<double>> &observed,
                             const std::vector<std::optional<double>> &predicted);

/// Density errors on scored points, as percentages of rho_water.
struct DensityMetrics
{
    std::size_t n = 0;
    std::optional<double> rmse_pct;
    std::optional<double> bias_pct;
    std::optional<double> mpe_pct;
};

DensityMetrics density_metrics(const DensityComparison &d);

struct WilcoxonResult
{
    std::size_t n_pairs = 0;
    std::size_t n_nonzero = 0;
    double w_plus = 0.0;
    double w_minus = 0.0;
    double p_value = 1.0;
    bool exact = false;
    bool all_zero = false; // p = 1 by convention
    std::optional<double> z;
};

struct WilcoxonOptions
{
    std::size_t exact_max_n = 15;
};

/// Paired two-sided signed-rank test on a - b. Zero differences are dropped and
/// ties get average ranks. Exact null distribution up to exact_max_n nonzero
/// pairs, otherwise a normal approximation with tie correction and continuity 0.5.
WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    const WilcoxonOptions &options = {});

struct AleCurve
{
    int feature = 0;
    std::string name;
    std::vector<double> edges;   // bin edges e_0 < e_1 < ... < e_B
    std::vector<double> values;  // centered ALE at e_1..e_B
    std::vector<std::size_t> counts; // samples per bin
};

struct AleOptions
{
    int bins = 20;
    std::size_t min_bin = 50;
};

using ScalarModel = std::function<double(std::span<const double>)>;

/// First-order ALE over quantile bins. Adjacent bins are merged until each
/// holds at least min_bin samples.
AleCurve ale_first_order(const ScalarModel &model, const TrainingSet &data, int feature,
                         const AleOptions &options = {});

struct MassAudit
{
    bool empty = true;            // no sub-freezing steps
    std::size_t steps = 0;        // sub-freezing steps audited
    std::size_t violations = 0;   // dSWE/dt > P_snow
    double violation_rate = 0.0;
    // mm/day
    double max_violation = 0.0;
    std::vector<double> violation_quantiles; // at audit_quantile_levels
    std::vector<double> residual_quantiles;  // of dSWE/dt - P_snow
};

inline const std::vector<double> audit_quantile_levels{0.0, 0.05, 0.25, 0.5, 0.75, 0.95, 1.0};

MassAudit mass_conservation_audit(const SimulationResult &coupled);

} // namespace snowode
