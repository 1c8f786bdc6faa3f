#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "snowode/io.hpp"
#include "snowode/model.hpp"
#include "snowode/training.hpp"

namespace snowode {

enum class BenchVariant {
    constrained,           // fixed-weight layers, exact evaluation
    constrained_algebraic, // same layers in plain double arithmetic
    ifelse                 // bounds applied with branches after prediction
};

std::string_view to_string(BenchVariant v);
BenchVariant bench_variant_from_string(std::string_view s);

/// Same predictive weights and thresholds; the clamp is done with conditionals.
class IfElseModel
{
public:
    explicit IfElseModel(ConstrainedModel base) : base_(std::move(base)) {}

    const ConstrainedModel &base() const { return base_; }
    double apply(double p, std::span<const double> raw) const;
    double rate(std::span<const double> raw) const { return apply(base_.raw_prediction(raw), raw); }

private:
    ConstrainedModel base_;
};

IfElseModel build_ifelse_variant(const PredictiveNet &net, const ThresholdSpec &spec, std::vector<double> scale_x,
                                 double scale_y, double dt, StateVariable target = StateVariable::depth);

/// Bound application of one variant to a physical prediction p.
double apply_variant(const ConstrainedModel &model, BenchVariant variant, double p, std::span<const double> raw);
double evaluate_variant(const ConstrainedModel &model, BenchVariant variant, std::span<const double> raw);

/// Batched evaluation of raw features stored column-wise (k x N), in chunks of `chunk` columns.
void evaluate_grid(const ConstrainedModel &model, BenchVariant variant, const Eigen::MatrixXd &raw,
                   std::vector<double> &out, std::size_t chunk = 8192);

struct BenchOptions
{
    std::vector<int> replications{14, 141}; // 0 entries are skipped; only zeros means column mode only
    int column_passes = 10;
    int grid_trials = 250;
    std::size_t chunk = 8192;
    std::vector<BenchVariant> variants{BenchVariant::constrained, BenchVariant::constrained_algebraic,
                                       BenchVariant::ifelse};
};

struct BenchRow
{
    BenchVariant variant = BenchVariant::constrained;
    std::string mode; // "column" or "grid"
    int replication = 1;
    std::size_t instances = 0; // per trial
    int trials = 0;
    double mean_us = 0.0; // per instance
    double std_us = 0.0;  // across trials, per instance
    double kb_per_eval = 0.0;
    double checksum = 0.0;
};

struct BenchReport
{
    std::size_t dataset_rows = 0;
    std::vector<BenchRow> rows;
};

BenchReport bench(const ConstrainedModel &model, const TrainingSet &data, const BenchOptions &options = {});

void write_bench_csv(std::ostream &out, const BenchReport &report, const Metadata &meta);

/// Metric rows by variant columns: time and memory for column mode and each grid size.
std::string format_bench_table(const BenchReport &report);

} // namespace snowode
