#include "snowode/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "snowode/error.hpp"

namespace snowode {

double quantile(std::vector<double> values, double q)
{
    if (values.empty())
        throw DataError("quantile of an empty sample");
    if (!(q >= 0.0 && q <= 1.0))
        throw InvalidConfiguration("quantile level must be in [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

double median(std::vector<double> values)
{
    return quantile(std::move(values), 0.5);
}

MetricReport compute_metrics(std::span<const double> observed, std::span<const double> predicted)
{
    if (observed.size() != predicted.size())
        throw ShapeError("observed and predicted differ in length");
    if (observed.empty())
        throw DataError("no points to score");
    MetricReport r;
    r.n = observed.size();
    const double n = static_cast<double>(r.n);

    double se = 0.0, ae = 0.0, bias = 0.0, o_mean = 0.0, p_mean = 0.0;
    double pos_sum = 0.0;
    std::size_t pos_n = 0;
    std::vector<double> rel;
    for (std::size_t i = 0; i < r.n; ++i) {
        const double o = observed[i];
        const double p = predicted[i];
        const double e = p - o;
        se += e * e;
        ae += std::abs(e);
        bias += e;
        o_mean += o;
        p_mean += p;
        if (o != 0.0) {
            rel.push_back(std::abs(e) / std::abs(o));
            pos_sum += o;
            ++pos_n;
        }
    }
    r.rmse = std::sqrt(se / n);
    r.mae = ae / n;
    r.bias = bias / n;
    o_mean /= n;
    p_mean /= n;
    if (!rel.empty())
        r.mpe = median(std::move(rel));
    if (pos_n > 0 && pos_sum != 0.0)
        r.spe = r.mae / (pos_sum / static_cast<double>(pos_n));

    double so = 0.0, sp = 0.0, sop = 0.0;
    for (std::size_t i = 0; i < r.n; ++i) {
        const double a = observed[i] - o_mean;
        const double b = predicted[i] - p_mean;
        so += a * a;
        sp += b * b;
        sop += a * b;
    }
    if (so > 0.0)
        r.nse = 1.0 - se / so;
    if (so > 0.0 && sp > 0.0)
        r.pearson_r = sop / std::sqrt(so * sp);
    return r;
}

MetricReport compute_metrics(const std::vector<std::optional<double>> &observed,
                             const std::vector<std::optional<double>> &predicted)
{
    if (observed.size() != predicted.size())
        throw ShapeError("observed and predicted differ in length");
    std::vector<double> o, p;
    for (std::size_t i = 0; i < observed.size(); ++i)
        if (observed[i] && predicted[i]) {
            o.push_back(*observed[i]);
            p.push_back(*predicted[i]);
        }
    return compute_metrics(o, p);
}

DensityMetrics density_metrics(const DensityComparison &d)
{
    DensityMetrics m;
    std::vector<double> o, p;
    for (std::size_t i = 0; i < d.scored.size(); ++i)
        if (d.scored[i]) {
            o.push_back(*d.data_ratio[i]);
            p.push_back(*d.model_ratio[i]);
        }
    m.n = o.size();
    if (o.empty())
        return m;
    const MetricReport r = compute_metrics(o, p);
    m.rmse_pct = 100.0 * r.rmse;
    m.bias_pct = 100.0 * r.bias;
    if (r.mpe)
        m.mpe_pct = 100.0 * *r.mpe;
    return m;
}

namespace {

double normal_cdf(double x)
{
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

// Average ranks of |d|, 1-based.
std::vector<double> average_ranks(const std::vector<double> &abs_d, double *tie_term)
{
    const std::size_t n = abs_d.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return abs_d[a] < abs_d[b]; });
    std::vector<double> rank(n);
    double ties = 0.0;
    for (std::size_t i = 0; i < n;) {
        std::size_t j = i;
        while (j + 1 < n && abs_d[order[j + 1]] == abs_d[order[i]])
            ++j;
        const double avg = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t m = i; m <= j; ++m)
            rank[order[m]] = avg;
        const double t = static_cast<double>(j - i + 1);
        ties += t * t * t - t;
        i = j + 1;
    }
    if (tie_term)
        *tie_term = ties;
    return rank;
}

} // namespace

WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b,
                                    const WilcoxonOptions &options)
{
    if (a.size() != b.size())
        throw ShapeError("Wilcoxon inputs must be paired");
    WilcoxonResult r;
    r.n_pairs = a.size();
    std::vector<double> d;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double diff = a[i] - b[i];
        if (!std::isfinite(diff))
            throw DataError("non-finite score in Wilcoxon input");
        if (diff != 0.0)
            d.push_back(diff);
    }
    r.n_nonzero = d.size();
    if (d.empty()) {
        r.all_zero = true;
        r.p_value = 1.0;
        r.exact = true;
        return r;
    }

    std::vector<double> abs_d(d.size());
    std::transform(d.begin(), d.end(), abs_d.begin(), [](double x) { return std::abs(x); });
    double tie_term = 0.0;
    const std::vector<double> rank = average_ranks(abs_d, &tie_term);
    for (std::size_t i = 0; i < d.size(); ++i)
        (d[i] > 0.0 ? r.w_plus : r.w_minus) += rank[i];

    const std::size_t n = d.size();
    if (n <= options.exact_max_n) {
        // Null distribution of 2 W+ by subset-sum counting over doubled ranks.
        std::vector<long> r2(n);
        long total = 0;
        for (std::size_t i = 0; i < n; ++i) {
            r2[i] = std::lround(2.0 * rank[i]);
            total += r2[i];
        }
        std::vector<double> count(static_cast<std::size_t>(total) + 1, 0.0);
        count[0] = 1.0;
        long reach = 0;
        for (long v : r2) {
            for (long s = reach; s >= 0; --s)
                if (count[static_cast<std::size_t>(s)] != 0.0)
                    count[static_cast<std::size_t>(s + v)] += count[static_cast<std::size_t>(s)];
            reach += v;
        }
        const long obs = std::lround(2.0 * r.w_plus);
        double lower = 0.0, upper = 0.0;
        for (long s = 0; s <= total; ++s) {
            if (s <= obs)
                lower += count[static_cast<std::size_t>(s)];
            if (s >= obs)
                upper += count[static_cast<std::size_t>(s)];
        }
        const double all = std::ldexp(1.0, static_cast<int>(n));
        r.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / all);
        r.exact = true;
        return r;
    }

    const double nn = static_cast<double>(n);
    const double mean = nn * (nn + 1.0) / 4.0;
    const double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0 - tie_term / 48.0;
    if (!(var > 0.0)) {
        r.p_value = 1.0;
        return r;
    }
    const double dev = std::max(0.0, std::abs(r.w_plus - mean) - 0.5);
    const double z = dev / std::sqrt(var);
    r.z = r.w_plus >= mean ? z : -z;
    r.p_value = std::min(1.0, 2.0 * (1.0 - normal_cdf(z)));
    return r;
}

AleCurve ale_first_order(const ScalarModel &model, const TrainingSet &data, int feature,
                         const AleOptions &options)
{
    if (feature < 0 || feature >= data.k)
        throw InvalidConfiguration("ALE feature index out of range");
    if (options.bins < 1 || options.min_bin < 1)
        throw InvalidConfiguration("ALE needs bins >= 1 and min_bin >= 1");
    const std::size_t n = data.size();
    if (n < options.min_bin)
        throw DataError("ALE needs at least " + std::to_string(options.min_bin) + " samples, got " +
                        std::to_string(n));

    const auto f = static_cast<std::size_t>(feature);
    std::vector<double> column(n);
    for (std::size_t i = 0; i < n; ++i)
        column[i] = data.row(i)[f];
    std::vector<double> sorted = column;
    std::sort(sorted.begin(), sorted.end());
    if (sorted.front() == sorted.back())
        throw DataError("ALE feature " + std::to_string(feature) + " is constant; no bins can be formed");

    const int bins = std::max(1, std::min(options.bins, static_cast<int>(n / options.min_bin)));
    std::vector<double> edges;
    for (int j = 0; j <= bins; ++j) {
        const double e = quantile(sorted, static_cast<double>(j) / bins);
        if (edges.empty() || e > edges.back())
            edges.push_back(e);
    }
    if (edges.size() < 2)
        throw DataError("ALE feature has degenerate quantiles");

    // Bin j covers (e_{j-1}, e_j]; the first bin also takes e_0.
    auto bin_of = [&](double x) {
        const auto it = std::lower_bound(edges.begin() + 1, edges.end(), x);
        return static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - edges.begin(),
                                                                 static_cast<std::ptrdiff_t>(edges.size() - 1))) -
               1;
    };
    auto tally = [&] {
        std::vector<std::size_t> counts(edges.size() - 1, 0);
        for (double x : column)
            ++counts[bin_of(x)];
        return counts;
    };

    std::vector<std::size_t> counts = tally();
    for (;;) {
        if (counts.size() == 1)
            break;
        const auto small = std::min_element(counts.begin(), counts.end());
        if (*small >= options.min_bin)
            break;
        const auto j = static_cast<std::size_t>(small - counts.begin());
        // Merge with the smaller neighbour by removing the shared edge.
        std::size_t drop;
        if (j == 0)
            drop = 1;
        else if (j + 1 == counts.size())
            drop = j;
        else
            drop = counts[j - 1] <= counts[j + 1] ? j : j + 1;
        edges.erase(edges.begin() + static_cast<std::ptrdiff_t>(drop));
        counts = tally();
    }

    const std::size_t nb = counts.size();
    std::vector<double> delta(nb, 0.0);
    std::vector<double> x(static_cast<std::size_t>(data.k));
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t j = bin_of(column[i]);
        const auto row = data.row(i);
        std::copy(row.begin(), row.end(), x.begin());
        x[f] = edges[j + 1];
        const double hi = model(x);
        x[f] = edges[j];
        const double lo = model(x);
        delta[j] += hi - lo;
    }

    AleCurve curve;
    curve.feature = feature;
    curve.edges = edges;
    curve.counts = counts;
    curve.values.resize(nb);
    double acc = 0.0, weighted = 0.0;
    for (std::size_t j = 0; j < nb; ++j) {
        acc += delta[j] / static_cast<double>(counts[j]);
        curve.values[j] = acc;
        weighted += static_cast<double>(counts[j]) * acc;
    }
    const double centre = weighted / static_cast<double>(n);
    for (double &v : curve.values)
        v -= centre;
    return curve;
}

MassAudit mass_conservation_audit(const SimulationResult &coupled)
{
    if (!coupled.coupled)
        throw InvalidConfiguration("mass audit needs a coupled simulation");
    constexpr double to_mm_day = 1000.0 * 86400.0;
    MassAudit a;
    std::vector<double> residuals, violations;
    for (const StepRecord &s : coupled.steps) {
        if (!(s.t_air < 0.0))
            continue;
        const double res = (s.rate_swe - s.p_snow) * to_mm_day;
        residuals.push_back(res);
        if (s.rate_swe > s.p_snow)
            violations.push_back(res);
    }
    a.steps = residuals.size();
    a.empty = residuals.empty();
    if (a.empty)
        return a;
    a.violations = violations.size();
    a.violation_rate = static_cast<double>(a.violations) / static_cast<double>(a.steps);
    for (double q : audit_quantile_levels)
        a.residual_quantiles.push_back(quantile(residuals, q));
    if (!violations.empty()) {
        a.max_violation = *std::max_element(violations.begin(), violations.end());
        for (double q : audit_quantile_levels)
            a.violation_quantiles.push_back(quantile(violations, q));
    }
    return a;
}

} // namespace snowode
