#include "doctest.h"

#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "snowode/alloc_counter.hpp"
#include "snowode/bench.hpp"
#include "snowode/error.hpp"

using namespace snowode;

namespace {

const std::vector<double> sx{0.3, 0.1, 0.2, 90.0, 2.5, 7.0, 3e-8};

std::vector<double> random_raw(std::mt19937_64 &rng)
{
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const double z = u(rng) < 0.2 ? 0.0 : 2.0 * u(rng);
    return {z, 0.3 * z * u(rng), u(rng), 300.0 * u(rng), 6.0 * u(rng), -15.0 + 25.0 * u(rng),
            u(rng) < 0.5 ? 0.0 : 1e-7 * u(rng)};
}

TrainingSet random_set(std::size_t n)
{
    std::mt19937_64 rng(5);
    TrainingSet s;
    for (std::size_t i = 0; i < n; ++i)
        s.add(random_raw(rng), 0.0, "b");
    return s;
}

} // namespace

TEST_CASE("if-else variant equals the constrained model")
{
    for (const ThresholdSpec &spec : {ThresholdSpec::snow(), ThresholdSpec::snowfall_capped()}) {
        const PredictiveNet net = init_predictive(7, 4, 31);
        const ConstrainedModel m(net, spec, sx, 2e-6, 86400.0);
        const IfElseModel e = build_ifelse_variant(net, spec, sx, 2e-6, 86400.0);
        std::mt19937_64 rng(6);
        for (int i = 0; i < 100000; ++i) {
            const auto raw = random_raw(rng);
            const double r = m.rate(raw);
            REQUIRE(e.rate(raw) == r);
            REQUIRE(evaluate_variant(m, BenchVariant::ifelse, raw) == r);
            REQUIRE(evaluate_variant(m, BenchVariant::constrained, raw) == r);
            // plain arithmetic cancels against the thresholds, so the error scales with them
            const RateDetail d = m.detail(raw);
            const double mag = std::abs(d.p) + std::abs(d.f_plus) + std::abs(d.f_minus);
            REQUIRE(std::abs(evaluate_variant(m, BenchVariant::constrained_algebraic, raw) - r) <= 8e-16 * mag);
        }
    }
}

TEST_CASE("one-sided specs through every variant")
{
    ThresholdSpec lower_only;
    lower_only.mode = ClampMode::max_with_f;
    lower_only.upper = UpperThreshold::none;
    ThresholdSpec upper_only;
    upper_only.mode = ClampMode::min_with_f;
    upper_only.lower = LowerThreshold::none;
    for (const ThresholdSpec &spec : {lower_only, upper_only}) {
        const ConstrainedModel m(init_predictive(7, 4, 8), spec, sx, 2e-6, 86400.0);
        std::mt19937_64 rng(7);
        for (int i = 0; i < 2000; ++i) {
            const auto raw = random_raw(rng);
            const double r = m.rate(raw);
            REQUIRE(evaluate_variant(m, BenchVariant::ifelse, raw) == r);
        }
    }
}

TEST_CASE("grid evaluation matches per-instance evaluation")
{
    const ConstrainedModel m(init_predictive(7, 4, 3), ThresholdSpec::snow(), sx, 2e-6, 86400.0);
    std::mt19937_64 rng(9);
    const Eigen::Index n = 1000;
    Eigen::MatrixXd raw(7, n);
    for (Eigen::Index j = 0; j < n; ++j) {
        const auto r = random_raw(rng);
        for (int i = 0; i < 7; ++i)
            raw(i, j) = r[static_cast<std::size_t>(i)];
    }
    for (auto v : {BenchVariant::constrained, BenchVariant::ifelse}) {
        std::vector<double> out;
        evaluate_grid(m, v, raw, out, 128); // chunk boundary inside the grid
        REQUIRE(out.size() == static_cast<std::size_t>(n));
        for (Eigen::Index j = 0; j < n; ++j) {
            std::vector<double> col(raw.col(j).data(), raw.col(j).data() + 7);
            REQUIRE(out[static_cast<std::size_t>(j)] == doctest::Approx(m.rate(col)).epsilon(1e-13));
        }
    }
    Eigen::MatrixXd wrong(6, 3);
    std::vector<double> out;
    CHECK_THROWS_AS(evaluate_grid(m, BenchVariant::constrained, wrong, out), ShapeError);
}

TEST_CASE("bench report shape")
{
    const ConstrainedModel m(init_predictive(7, 4, 3), ThresholdSpec::snow(), sx, 2e-6, 86400.0);
    const TrainingSet data = random_set(50);
    BenchOptions opt;
    opt.replications = {2, 3};
    opt.column_passes = 2;
    opt.grid_trials = 3;
    const BenchReport r = bench(m, data, opt);
    CHECK(r.dataset_rows == 50);
    // per variant: one column row and one grid row per replication
    REQUIRE(r.rows.size() == 9);
    for (const BenchRow &row : r.rows) {
        CHECK(row.mean_us > 0.0);
        CHECK(row.std_us >= 0.0);
        CHECK(row.kb_per_eval >= 0.0);
        if (row.mode == "column") {
            CHECK(row.instances == 50);
            CHECK(row.trials == 2);
        } else {
            CHECK(row.mode == "grid");
            CHECK(row.instances == 50 * static_cast<std::size_t>(row.replication));
            CHECK(row.trials == 3);
        }
    }
    // column rows first, then one row per variant for each replication
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(r.rows[i].mode == "column");
    CHECK(r.rows[3].replication == 2);
    CHECK(r.rows[8].replication == 3);
    // every variant sees the same data, so checksums agree
    for (std::size_t base : {0, 3, 6})
        for (std::size_t j = 1; j < 3; ++j)
            CHECK(r.rows[base + j].checksum == doctest::Approx(r.rows[base].checksum).epsilon(1e-9));

    const std::string table = format_bench_table(r);
    CHECK(table.find("Column") != std::string::npos);
    CHECK(table.find("Grid x3") != std::string::npos);
    std::ostringstream csv;
    write_bench_csv(csv, r, artifact_metadata("bench"));
    CHECK(csv.str().find("variant") != std::string::npos);

    opt.replications = {0};
    const BenchReport col = bench(m, data, opt);
    REQUIRE(col.rows.size() == 3);
    for (const BenchRow &row : col.rows)
        CHECK(row.mode == "column");
}

TEST_CASE("allocation counter sees heap traffic")
{
    const auto before = alloc::bytes_allocated();
    const auto count = alloc::allocation_count();
    {
        std::vector<double> v(1000);
        v[3] = 1.0;
        CHECK(v[3] == 1.0);
    }
    CHECK(alloc::bytes_allocated() - before >= 8000);
    CHECK(alloc::allocation_count() > count);
    const auto eigen_before = alloc::bytes_allocated();
    Eigen::MatrixXd big(100, 100);
    big.setZero();
    CHECK(alloc::bytes_allocated() - eigen_before >= 80000);
}

TEST_CASE("variant names")
{
    for (auto v : {BenchVariant::constrained, BenchVariant::constrained_algebraic, BenchVariant::ifelse})
        CHECK(bench_variant_from_string(to_string(v)) == v);
    CHECK_THROWS_AS(bench_variant_from_string("fast"), InvalidConfiguration);
}
