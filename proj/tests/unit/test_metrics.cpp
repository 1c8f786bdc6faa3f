#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "snowode/error.hpp"
#include "snowode/metrics.hpp"

using namespace snowode;

namespace {

// Average ranks by direct counting: rank = (#less) + (#equal + 1) / 2.
std::vector<double> ranks_by_counting(const std::vector<double> &v)
{
    std::vector<double> r(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) {
        double less = 0.0, equal = 0.0;
        for (double w : v) {
            less += w < v[i];
            equal += w == v[i];
        }
        r[i] = less + (equal + 1.0) / 2.0;
    }
    return r;
}

double brute_force_p(const std::vector<double> &a, const std::vector<double> &b)
{
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i)
        if (a[i] != b[i])
            d.push_back(a[i] - b[i]);
    std::vector<double> mag(d.size());
    for (std::size_t i = 0; i < d.size(); ++i)
        mag[i] = std::fabs(d[i]);
    const auto r = ranks_by_counting(mag);
    double obs = 0.0;
    for (std::size_t i = 0; i < d.size(); ++i)
        if (d[i] > 0.0)
            obs += r[i];
    const std::size_t n = d.size();
    double lo = 0.0, hi = 0.0;
    for (std::uint32_t mask = 0; mask < (1u << n); ++mask) {
        double w = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            if (mask & (1u << i))
                w += r[i];
        lo += w <= obs + 1e-9;
        hi += w >= obs - 1e-9;
    }
    return std::min(1.0, 2.0 * std::min(lo, hi) / static_cast<double>(1u << n));
}

TrainingSet uniform_set(std::size_t n, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    TrainingSet s;
    s.k = 3;
    for (std::size_t i = 0; i < n; ++i) {
        const double x[3] = {u(rng), 5.0 * u(rng), u(rng) * u(rng)};
        s.add(x, 0.0, "s");
    }
    return s;
}

} // namespace

TEST_CASE("three-point metrics by hand")
{
    const std::vector<double> o{1.0, 2.0, 3.0};
    const std::vector<double> p{1.5, 2.0, 2.0};
    const MetricReport m = compute_metrics(o, p);
    CHECK(m.n == 3);
    CHECK(m.rmse == doctest::Approx(std::sqrt(1.25 / 3.0)).epsilon(1e-12));
    CHECK(m.mae == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(m.bias == doctest::Approx(-1.0 / 6.0).epsilon(1e-12));
    CHECK(*m.mpe == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(*m.nse == doctest::Approx(0.375).epsilon(1e-12));
    CHECK(*m.spe == doctest::Approx(0.25).epsilon(1e-12));
    // r = cov / (sd_o sd_p): o - 2 = {-1, 0, 1}, p - 11/6 = {-1/3, 1/6, 1/6}
    const double cov = (1.0 / 3.0) + 0.0 + (1.0 / 6.0);
    const double so = 2.0, sp = 1.0 / 9.0 + 2.0 / 36.0;
    CHECK(*m.pearson_r == doctest::Approx(cov / std::sqrt(so * sp)).epsilon(1e-12));
}

TEST_CASE("metric edge cases")
{
    const std::vector<double> zeros{0.0, 0.0, 0.0};
    const std::vector<double> p{0.1, 0.0, 0.2};
    const MetricReport m = compute_metrics(zeros, p);
    CHECK_FALSE(m.nse.has_value());
    CHECK_FALSE(m.mpe.has_value());
    CHECK_FALSE(m.spe.has_value());
    CHECK(m.mae == doctest::Approx(0.1));

    const std::vector<double> o{0.0, 2.0, 4.0};
    const MetricReport perfect = compute_metrics(o, o);
    CHECK(perfect.rmse == 0.0);
    CHECK(*perfect.nse == 1.0);
    CHECK(*perfect.mpe == 0.0);
    CHECK(*perfect.spe == 0.0);

    // zero observations are skipped by MPE and SPE
    const std::vector<double> q{1.0, 3.0, 4.0};
    const MetricReport z = compute_metrics(o, q);
    CHECK(*z.mpe == doctest::Approx(0.25));
    CHECK(*z.spe == doctest::Approx((2.0 / 3.0) / 3.0));

    CHECK_THROWS_AS(compute_metrics(o, std::vector<double>{1.0}), ShapeError);

    using O = std::optional<double>;
    const MetricReport paired = compute_metrics(std::vector<O>{1.0, O{}, 3.0}, std::vector<O>{1.5, 2.0, O{}});
    CHECK(paired.n == 1);
    CHECK(paired.mae == 0.5);
}

TEST_CASE("quantile type 7")
{
    CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.5) == 2.5);
    CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 0.25) == 1.75);
    CHECK(quantile({7.0}, 0.9) == 7.0);
    CHECK(median({5.0, 1.0, 3.0}) == 3.0);
    CHECK(quantile({1.0, 2.0}, 1.0) == 2.0);
}

TEST_CASE("exact Wilcoxon matches brute-force enumeration")
{
    std::mt19937_64 rng(41);
    std::uniform_int_distribution<int> small(-6, 6);
    for (int t = 0; t < 300; ++t) {
        const std::size_t n = 1 + static_cast<std::size_t>(t % 12);
        std::vector<double> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = small(rng);
            b[i] = small(rng); // integer values give ties and zeros
        }
        const WilcoxonResult r = wilcoxon_signed_rank(a, b);
        REQUIRE(r.exact);
        if (r.all_zero) {
            REQUIRE(r.p_value == 1.0);
            continue;
        }
        REQUIRE(r.p_value == doctest::Approx(brute_force_p(a, b)).epsilon(1e-12));
        const double nz = static_cast<double>(r.n_nonzero);
        REQUIRE(r.w_plus + r.w_minus == doctest::Approx(nz * (nz + 1.0) / 2.0));
        // two-sided: swapping the samples gives the same p
        REQUIRE(wilcoxon_signed_rank(b, a).p_value == doctest::Approx(r.p_value).epsilon(1e-12));
    }
}

TEST_CASE("Wilcoxon known values")
{
    // all eight differences positive: p = 2 / 256
    const std::vector<double> a{1, 2, 3, 4, 5, 6, 7, 8};
    const std::vector<double> b(8, 0.0);
    const WilcoxonResult r = wilcoxon_signed_rank(a, b);
    CHECK(r.w_plus == 36.0);
    CHECK(r.w_minus == 0.0);
    CHECK(r.p_value == doctest::Approx(2.0 / 256.0).epsilon(1e-14));

    const WilcoxonResult zero = wilcoxon_signed_rank(b, b);
    CHECK(zero.all_zero);
    CHECK(zero.p_value == 1.0);
    CHECK_THROWS_AS(wilcoxon_signed_rank(a, std::vector<double>{1.0}), ShapeError);
}

TEST_CASE("Wilcoxon normal approximation")
{
    std::mt19937_64 rng(8);
    std::normal_distribution<double> g(0.3, 1.0);
    const std::size_t n = 30;
    std::vector<double> a(n), b(n, 0.0);
    for (double &v : a)
        v = g(rng);
    const WilcoxonResult r = wilcoxon_signed_rank(a, b);
    CHECK_FALSE(r.exact);
    REQUIRE(r.z.has_value());
    // continuous data has no ties
    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1) / 4.0;
    const double sd = std::sqrt(nn * (nn + 1) * (2 * nn + 1) / 24.0);
    const double z = (std::fabs(r.w_plus - mean) - 0.5) / sd;
    CHECK(std::fabs(*r.z) == doctest::Approx(z).epsilon(1e-12));
    CHECK(r.p_value == doctest::Approx(std::erfc(z / std::sqrt(2.0))).epsilon(1e-12));

    // at the boundary the approximation lands near the exact answer
    WilcoxonOptions exact_opt;
    exact_opt.exact_max_n = 30;
    const double exact = wilcoxon_signed_rank(a, b, exact_opt).p_value;
    CHECK(r.p_value == doctest::Approx(exact).epsilon(0.05));
}

TEST_CASE("ALE of an affine model")
{
    const TrainingSet data = uniform_set(2000, 4);
    const double coef[3] = {2.0, -0.5, 7.0};
    const ScalarModel affine = [&](std::span<const double> x) {
        return 1.5 + coef[0] * x[0] + coef[1] * x[1] + coef[2] * x[2];
    };
    for (int f = 0; f < 3; ++f) {
        AleOptions opt;
        opt.bins = 10;
        opt.min_bin = 50;
        const AleCurve c = ale_first_order(affine, data, f, opt);
        REQUIRE(c.values.size() + 1 == c.edges.size());
        std::size_t total = 0;
        double weighted = 0.0;
        for (std::size_t j = 0; j < c.values.size(); ++j) {
            total += c.counts[j];
            REQUIRE(c.counts[j] >= opt.min_bin);
            weighted += static_cast<double>(c.counts[j]) * coef[f] * (c.edges[j + 1] - c.edges[0]);
        }
        CHECK(total == data.size());
        const double centre = weighted / static_cast<double>(total);
        for (std::size_t j = 0; j < c.values.size(); ++j)
            CHECK(c.values[j] == doctest::Approx(coef[f] * (c.edges[j + 1] - c.edges[0]) - centre).epsilon(1e-10));
    }
}

TEST_CASE("ALE bin merging and errors")
{
    const TrainingSet data = uniform_set(300, 5);
    AleOptions opt;
    opt.bins = 20;
    opt.min_bin = 50;
    const ScalarModel m = [](std::span<const double> x) { return x[0] * x[0]; };
    const AleCurve c = ale_first_order(m, data, 0, opt);
    CHECK(c.values.size() <= 6);
    for (std::size_t n : c.counts)
        CHECK(n >= 50);

    TrainingSet flat;
    flat.k = 1;
    for (int i = 0; i < 100; ++i) {
        const double x[1] = {3.0};
        flat.add(x, 0.0, "s");
    }
    CHECK_THROWS_AS(ale_first_order(m, flat, 0, opt), DataError);
    CHECK_THROWS_AS(ale_first_order(m, data, 3, opt), InvalidConfiguration);
    opt.min_bin = 1000;
    CHECK_THROWS_AS(ale_first_order(m, data, 0, opt), DataError);
}

TEST_CASE("mass audit")
{
    SimulationResult r;
    r.coupled = true;
    const double mmd = 1.0 / (1000.0 * 86400.0); // 1 mm/day in m/s
    r.steps = {
        StepRecord{0, 1, 1, 0.0, 3 * mmd, -2.0, 1 * mmd}, // violation of 2 mm/day
        StepRecord{1, 2, 1, 0.0, 1 * mmd, -1.0, 1 * mmd}, // equal, not a violation
        StepRecord{2, 3, 1, 0.0, 9 * mmd, 0.0, 0.0},      // not sub-freezing
        StepRecord{3, 4, 1, 0.0, -1 * mmd, -5.0, 0.0},
    };
    const MassAudit a = mass_conservation_audit(r);
    CHECK_FALSE(a.empty);
    CHECK(a.steps == 3);
    CHECK(a.violations == 1);
    CHECK(a.violation_rate == doctest::Approx(1.0 / 3.0));
    CHECK(a.max_violation == doctest::Approx(2.0).epsilon(1e-12));
    REQUIRE(a.residual_quantiles.size() == audit_quantile_levels.size());
    CHECK(a.residual_quantiles.front() == doctest::Approx(-1.0).epsilon(1e-12));
    CHECK(a.residual_quantiles.back() == doctest::Approx(2.0).epsilon(1e-12));

    SimulationResult warm;
    warm.coupled = true;
    warm.steps = {StepRecord{0, 1, 1, 0.0, 1.0, 4.0, 0.0}};
    CHECK(mass_conservation_audit(warm).empty);

    SimulationResult depth_only;
    CHECK_THROWS_AS(mass_conservation_audit(depth_only), InvalidConfiguration);
}

TEST_CASE("snowfall-capped SWE models never violate the mass audit")
{
    std::mt19937_64 rng(12);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::vector<double> sx{0.2, 0.5, 0.2, 80.0, 2.0, 6.0, 1e-7};
    for (int t = 0; t < 20; ++t) {
        SiteSeries s;
        s.site = "cap";
        for (int d = 0; d < 90; ++d) {
            ForcingRecord r;
            r.time = static_cast<std::int64_t>(d) * 86400;
            r.rh = u(rng);
            r.solar = 200.0 * u(rng);
            r.wind = 4.0 * u(rng);
            r.t_air = -12.0 + 14.0 * u(rng);
            r.p_snow = u(rng) < 0.4 ? 1e-7 * u(rng) : 0.0;
            s.records.push_back(r);
        }
        s.records[0].z = 0.5;
        s.records[0].swe = 0.1;
        const ConstrainedModel mz(init_predictive(7, 4, 200 + t), ThresholdSpec::snow(), sx, 1e-6, 86400.0);
        const ConstrainedModel ms(init_predictive(7, 4, 300 + t), ThresholdSpec::snowfall_capped(), sx, 1e-6, 86400.0,
                                  StateVariable::swe);
        const MassAudit a = mass_conservation_audit(simulate_coupled(s, mz, ms));
        REQUIRE_FALSE(a.empty);
        REQUIRE(a.violations == 0);
    }
}

TEST_CASE("density metrics in percent")
{
    using O = std::optional<double>;
    const std::vector<O> mz{1.0, 1.0, 1.0};
    const std::vector<O> ms{0.30, 0.25, 0.5};
    const std::vector<O> dz{1.0, 1.0, 0.0};
    const std::vector<O> ds{0.20, 0.25, 0.0};
    const DensityMetrics m = density_metrics(derive_density(mz, ms, dz, ds));
    CHECK(m.n == 2);
    CHECK(*m.rmse_pct == doctest::Approx(100.0 * std::sqrt(0.01 / 2.0)).epsilon(1e-12));
    CHECK(*m.bias_pct == doctest::Approx(5.0).epsilon(1e-12));
    CHECK(*m.mpe_pct == doctest::Approx(100.0 * 0.25).epsilon(1e-12));
}
