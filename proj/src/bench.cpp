#include "snowode/bench.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <sstream>

#include "snowode/alloc_counter.hpp"
#include "snowode/csv.hpp"
#include "snowode/error.hpp"

namespace snowode {

std::string_view to_string(BenchVariant v)
{
    switch (v) {
    case BenchVariant::constrained:
        return "constrained";
    case BenchVariant::constrained_algebraic:
        return "constrained_algebraic";
    case BenchVariant::ifelse:
        return "ifelse";
    }
    return "constrained";
}

BenchVariant bench_variant_from_string(std::string_view s)
{
    for (BenchVariant v : {BenchVariant::constrained, BenchVariant::constrained_algebraic, BenchVariant::ifelse})
        if (to_string(v) == s)
            return v;
    throw InvalidConfiguration("unknown bench variant '" + std::string(s) + "'");
}

double IfElseModel::apply(double p, std::span<const double> raw) const
{
    return apply_variant(base_, BenchVariant::ifelse, p, raw);
}

IfElseModel build_ifelse_variant(const PredictiveNet &net, const ThresholdSpec &spec, std::vector<double> scale_x,
                                 double scale_y, double dt, StateVariable target)
{
    return IfElseModel(ConstrainedModel(net, spec, std::move(scale_x), scale_y, dt, target));
}

double apply_variant(const ConstrainedModel &model, BenchVariant variant, double p, std::span<const double> raw)
{
    if (variant == BenchVariant::ifelse) {
        const auto [f_plus, f_minus] = model.thresholds(p, raw);
        double r = p;
        const ClampMode mode = model.spec().mode;
        if (mode != ClampMode::max_with_f && r > f_plus)
            r = f_plus;
        if (mode != ClampMode::min_with_f && r < f_minus)
            r = f_minus;
        return r;
    }
    const auto [f_plus, f_minus] = model.thresholds(p, raw);
    double in[3] = {p, f_plus, f_minus};
    std::span<const double> inputs(in, 3);
    if (model.spec().mode == ClampMode::max_with_f) {
        in[1] = f_minus;
        inputs = inputs.first(2);
    } else if (model.spec().mode == ClampMode::min_with_f) {
        inputs = inputs.first(2);
    }
    return variant == BenchVariant::constrained ? model.layers().evaluate(inputs)
                                                : model.layers().evaluate_plain(inputs);
}

double evaluate_variant(const ConstrainedModel &model, BenchVariant variant, std::span<const double> raw)
{
    return apply_variant(model, variant, model.raw_prediction(raw), raw);
}

void evaluate_grid(const ConstrainedModel &model, BenchVariant variant, const Eigen::MatrixXd &raw,
                   std::vector<double> &out, std::size_t chunk)
{
    if (raw.rows() != model.input_count())
        throw ShapeError("grid rows must equal the model input count");
    if (chunk == 0)
        throw InvalidConfiguration("chunk must be positive");
    const auto n = static_cast<std::size_t>(raw.cols());
    out.resize(n);
    Eigen::VectorXd inv(raw.rows());
    for (Eigen::Index i = 0; i < raw.rows(); ++i)
        inv[i] = 1.0 / model.scale_x()[static_cast<std::size_t>(i)];
    Eigen::RowVectorXd p;
    for (std::size_t start = 0; start < n; start += chunk) {
        const auto cols = static_cast<Eigen::Index>(std::min(chunk, n - start));
        const Eigen::MatrixXd scaled = inv.asDiagonal() * raw.middleCols(static_cast<Eigen::Index>(start), cols);
        forward_batch(model.net(), scaled, p);
        for (Eigen::Index j = 0; j < cols; ++j) {
            const auto col = static_cast<Eigen::Index>(start) + j;
            const std::span<const double> x(raw.col(col).data(), static_cast<std::size_t>(raw.rows()));
            out[start + static_cast<std::size_t>(j)] = apply_variant(model, variant, p[j] * model.scale_y(), x);
        }
    }
}

namespace {

using clock_type = std::chrono::steady_clock;

void summarize(BenchRow &row, const std::vector<double> &per_instance_us, std::uint64_t bytes)
{
    double mean = 0.0;
    for (double v : per_instance_us)
        mean += v;
    mean /= static_cast<double>(per_instance_us.size());
    double var = 0.0;
    for (double v : per_instance_us)
        var += (v - mean) * (v - mean);
    row.mean_us = mean;
    row.std_us = per_instance_us.size() > 1 ? std::sqrt(var / static_cast<double>(per_instance_us.size() - 1)) : 0.0;
    const double evals = static_cast<double>(row.instances) * static_cast<double>(row.trials);
    row.kb_per_eval = static_cast<double>(bytes) / 1024.0 / evals;
}

} // namespace

BenchReport bench(const ConstrainedModel &model, const TrainingSet &data, const BenchOptions &options)
{
    if (data.empty())
        throw DataError("benchmark dataset is empty");
    if (data.k != model.input_count())
        throw ShapeError("benchmark data does not match the model inputs");
    if (options.column_passes < 1 || options.grid_trials < 1)
        throw InvalidConfiguration("benchmark needs at least one pass and one trial");
    BenchReport report;
    report.dataset_rows = data.size();
    const std::size_t rows = data.size();

    for (BenchVariant v : options.variants) {
        BenchRow row{v, "column", 1, rows, options.column_passes, 0.0, 0.0, 0.0, 0.0};
        double sink = 0.0;
        for (std::size_t i = 0; i < rows; ++i) // warm-up
            sink += evaluate_variant(model, v, data.row(i));
        std::vector<double> samples;
        std::uint64_t bytes = 0;
        for (int pass = 0; pass < options.column_passes; ++pass) {
            const std::uint64_t b0 = alloc::bytes_allocated();
            const auto t0 = clock_type::now();
            for (std::size_t i = 0; i < rows; ++i)
                sink += evaluate_variant(model, v, data.row(i));
            const auto t1 = clock_type::now();
            bytes += alloc::bytes_allocated() - b0;
            samples.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count() / static_cast<double>(rows));
        }
        summarize(row, samples, bytes);
        row.checksum = sink;
        report.rows.push_back(row);
    }

    for (int rep : options.replications) {
        if (rep <= 0)
            continue;
        const std::size_t n = rows * static_cast<std::size_t>(rep);
        Eigen::MatrixXd grid(data.k, static_cast<Eigen::Index>(n));
        for (std::size_t r = 0; r < static_cast<std::size_t>(rep); ++r)
            for (std::size_t i = 0; i < rows; ++i) {
                const auto x = data.row(i);
                for (int f = 0; f < data.k; ++f)
                    grid(f, static_cast<Eigen::Index>(r * rows + i)) = x[static_cast<std::size_t>(f)];
            }
        std::vector<double> out;
        for (BenchVariant v : options.variants) {
            BenchRow row{v, "grid", rep, n, options.grid_trials, 0.0, 0.0, 0.0, 0.0};
            evaluate_grid(model, v, grid, out, options.chunk); // warm-up, sizes `out`
            std::vector<double> samples;
            std::uint64_t bytes = 0;
            double sink = 0.0;
            for (int t = 0; t < options.grid_trials; ++t) {
                const std::uint64_t b0 = alloc::bytes_allocated();
                const auto t0 = clock_type::now();
                evaluate_grid(model, v, grid, out, options.chunk);
                const auto t1 = clock_type::now();
                bytes += alloc::bytes_allocated() - b0;
                samples.push_back(std::chrono::duration<double, std::micro>(t1 - t0).count() / static_cast<double>(n));
                sink += out[static_cast<std::size_t>(t) % n];
            }
            summarize(row, samples, bytes);
            row.checksum = sink;
            report.rows.push_back(row);
        }
    }
    return report;
}

void write_bench_csv(std::ostream &out, const BenchReport &report, const Metadata &meta)
{
    write_metadata(out, meta);
    out << "# dataset_rows: " << report.dataset_rows << '\n';
    write_row(out, {"variant", "mode", "replication", "instances", "trials", "mean_us", "std_us", "kb_per_eval"});
    for (const BenchRow &r : report.rows)
        write_row(out, {std::string(to_string(r.variant)), r.mode, std::to_string(r.replication),
                        std::to_string(r.instances), std::to_string(r.trials), format_double(r.mean_us),
                        format_double(r.std_us), format_double(r.kb_per_eval)});
}

std::string format_bench_table(const BenchReport &report)
{
    std::vector<BenchVariant> variants;
    std::vector<std::pair<std::string, int>> modes;
    for (const BenchRow &r : report.rows) {
        if (std::find(variants.begin(), variants.end(), r.variant) == variants.end())
            variants.push_back(r.variant);
        const std::pair<std::string, int> m{r.mode, r.replication};
        if (std::find(modes.begin(), modes.end(), m) == modes.end())
            modes.push_back(m);
    }
    auto find = [&](BenchVariant v, const std::pair<std::string, int> &m) -> const BenchRow * {
        for (const BenchRow &r : report.rows)
            if (r.variant == v && r.mode == m.first && r.replication == m.second)
                return &r;
        return nullptr;
    };
    std::ostringstream s;
    char buf[64];
    std::snprintf(buf, sizeof buf, "%-34s", "metric");
    s << buf;
    for (BenchVariant v : variants) {
        std::snprintf(buf, sizeof buf, "%24s", std::string(to_string(v)).c_str());
        s << buf;
    }
    s << '\n';
    for (const auto &m : modes) {
        const BenchRow *any = find(variants.front(), m);
        const std::string label = m.first == "column"
                                      ? std::string("Column")
                                      : "Grid x" + std::to_string(m.second) + " (" +
                                            std::to_string(any ? any->instances : 0) + ")";
        for (int metric = 0; metric < 2; ++metric) {
            std::snprintf(buf, sizeof buf, "%-34s",
                          (label + (metric == 0 ? ", T (us)" : ", Allocated Memory (KB)")).c_str());
            s << buf;
            for (BenchVariant v : variants) {
                const BenchRow *r = find(v, m);
                if (!r)
                    std::snprintf(buf, sizeof buf, "%24s", "-");
                else if (metric == 0)
                    std::snprintf(buf, sizeof buf, "%14.4g +- %-7.2g", r->mean_us, r->std_us);
                else
                    std::snprintf(buf, sizeof buf, "%24.4g", r->kb_per_eval);
                s << buf;
            }
            s << '\n';
        }
    }
    return s.str();
}

} // namespace snowode
