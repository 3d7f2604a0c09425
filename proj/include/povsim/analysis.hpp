#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <povsim/experiments.hpp>
#include <povsim/metrics.hpp>
#include <povsim/rng.hpp>

namespace povsim {

inline constexpr std::array<const char*, 5> free_param_names = {
    "ell", "g_upper", "beta", "theta", "alpha"};

inline std::array<double, 5> free_param_values(const FreeParams& p) {
    return {p.ell, p.g_upper, p.beta, p.theta, p.alpha};
}

struct SobolIndices {
    bool degenerate = false;  // constant response: every index reported as 0
    int bootstrap_resamples = 0;
    std::vector<double> first, total;
    std::vector<double> first_lo, first_hi, total_lo, total_hi;
    std::vector<std::vector<double>> first_samples;  // resample x parameter
    std::vector<std::vector<double>> total_samples;
};

namespace detail {

struct JansenInput {
    int dims = 0;
    int n = 0;
    const double* fa = nullptr;   // n
    const double* fb = nullptr;   // n
    const double* fab = nullptr;  // n x dims, row-major per base sample
};

inline bool jansen_estimate(const JansenInput& in, const std::vector<int>& idx,
                            std::vector<double>& first, std::vector<double>& total) {
    const auto n = static_cast<double>(idx.size());
    double sum = 0.0, sum2 = 0.0;
    for (const int j : idx) {
        sum += in.fa[j] + in.fb[j];
        sum2 += in.fa[j] * in.fa[j] + in.fb[j] * in.fb[j];
    }
    const double mean = sum / (2.0 * n);
    const double var = sum2 / (2.0 * n) - mean * mean;
    first.assign(static_cast<std::size_t>(in.dims), 0.0);
    total.assign(static_cast<std::size_t>(in.dims), 0.0);
    if (!(var > 1e-300)) return false;
    for (int i = 0; i < in.dims; ++i) {
        double db = 0.0, da = 0.0;
        for (const int j : idx) {
            const double fab = in.fab[static_cast<std::size_t>(j) *
                                          static_cast<std::size_t>(in.dims) +
                                      static_cast<std::size_t>(i)];
            const double xb = in.fb[j] - fab;
            const double xa = in.fa[j] - fab;
            db += xb * xb;
            da += xa * xa;
        }
        first[static_cast<std::size_t>(i)] = 1.0 - db / n / (2.0 * var);
        total[static_cast<std::size_t>(i)] = da / n / (2.0 * var);
    }
    return true;
}

}  // namespace detail

// Jansen-form first and total order estimators over the A/B/AB block layout,
// with percentile bootstrap intervals over base samples.
inline SobolIndices sobol_indices(const SaltelliPlan& plan,
                                  const std::vector<double>& qoi_per_row,
                                  int bootstrap_resamples = 200,
                                  std::uint64_t bootstrap_seed = 1) {
    if (static_cast<int>(qoi_per_row.size()) != plan.row_count())
        throw std::invalid_argument("sobol_indices: qoi length != plan row count");
    for (const double v : qoi_per_row)
        if (!std::isfinite(v))
            throw std::invalid_argument("sobol_indices: non-finite qoi entry");
    if (bootstrap_resamples < 200)
        throw std::invalid_argument("sobol_indices: need at least 200 bootstrap resamples");
    if (plan.base_samples < 2)
        throw std::invalid_argument("sobol_indices: need at least 2 base samples");

    const int dims = plan.dims;
    const int n = plan.base_samples;
    std::vector<double> fa(static_cast<std::size_t>(n)), fb(static_cast<std::size_t>(n));
    std::vector<double> fab(static_cast<std::size_t>(n) * static_cast<std::size_t>(dims));
    for (int j = 0; j < n; ++j) {
        fa[static_cast<std::size_t>(j)] = qoi_per_row[static_cast<std::size_t>(plan.a_row(j))];
        fb[static_cast<std::size_t>(j)] = qoi_per_row[static_cast<std::size_t>(plan.b_row(j))];
        for (int i = 0; i < dims; ++i)
            fab[static_cast<std::size_t>(j) * static_cast<std::size_t>(dims) +
                static_cast<std::size_t>(i)] =
                qoi_per_row[static_cast<std::size_t>(plan.ab_row(j, i))];
    }

    detail::JansenInput in;
    in.dims = dims;
    in.n = n;
    in.fa = fa.data();
    in.fb = fb.data();
    in.fab = fab.data();

    std::vector<int> all(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) all[static_cast<std::size_t>(j)] = j;

    SobolIndices out;
    out.bootstrap_resamples = bootstrap_resamples;
    out.degenerate = !detail::jansen_estimate(in, all, out.first, out.total);

    Rng rng(bootstrap_seed);
    std::vector<int> resample(static_cast<std::size_t>(n));
    std::vector<double> f(static_cast<std::size_t>(dims)), t(static_cast<std::size_t>(dims));
    out.first_samples.reserve(static_cast<std::size_t>(bootstrap_resamples));
    out.total_samples.reserve(static_cast<std::size_t>(bootstrap_resamples));
    for (int r = 0; r < bootstrap_resamples; ++r) {
        for (int j = 0; j < n; ++j)
            resample[static_cast<std::size_t>(j)] = rng.uniform_int(n);
        detail::jansen_estimate(in, resample, f, t);
        out.first_samples.push_back(f);
        out.total_samples.push_back(t);
    }

    out.first_lo.resize(static_cast<std::size_t>(dims));
    out.first_hi.resize(static_cast<std::size_t>(dims));
    out.total_lo.resize(static_cast<std::size_t>(dims));
    out.total_hi.resize(static_cast<std::size_t>(dims));
    std::vector<double> column(static_cast<std::size_t>(bootstrap_resamples));
    for (int i = 0; i < dims; ++i) {
        for (int r = 0; r < bootstrap_resamples; ++r)
            column[static_cast<std::size_t>(r)] =
                out.first_samples[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)];
        out.first_lo[static_cast<std::size_t>(i)] = quantile(column, 0.025);
        out.first_hi[static_cast<std::size_t>(i)] = quantile(column, 0.975);
        for (int r = 0; r < bootstrap_resamples; ++r)
            column[static_cast<std::size_t>(r)] =
                out.total_samples[static_cast<std::size_t>(r)][static_cast<std::size_t>(i)];
        out.total_lo[static_cast<std::size_t>(i)] = quantile(column, 0.025);
        out.total_hi[static_cast<std::size_t>(i)] = quantile(column, 0.975);
    }
    return out;
}

// Per-run responses are averaged over repetitions before estimation.
inline SobolIndices sobol_indices(const ExperimentDesign& design,
                                  const std::vector<double>& qoi_per_run,
                                  int bootstrap_resamples = 200,
                                  std::uint64_t bootstrap_seed = 1) {
    const auto rows = static_cast<std::size_t>(design.row_count());
    const auto reps = static_cast<std::size_t>(design.rep_count);
    if (qoi_per_run.size() != rows * reps)
        throw std::invalid_argument("sobol_indices: qoi length != rows x reps");
    std::vector<double> per_row(rows, 0.0);
    for (std::size_t row = 0; row < rows; ++row) {
        double acc = 0.0;
        for (std::size_t rep = 0; rep < reps; ++rep)
            acc += qoi_per_run[row * reps + rep];
        per_row[row] = acc / static_cast<double>(reps);
    }
    return sobol_indices(design.plan, per_row, bootstrap_resamples, bootstrap_seed);
}

struct CorrelationReport {
    bool defined = false;
    double r = 0.0;
    int n = 0;
    std::string note;
};

// Pearson correlation of (total final wealth, final Gini) over SomeRich runs.
inline CorrelationReport wealth_gini_correlation(const std::vector<RunRecord>& records) {
    std::vector<double> wealth, gini_vals;
    for (const auto& rec : records) {
        if (!rec.ok || rec.individual_regime != Regime::some_rich) continue;
        wealth.push_back(rec.total_final_wealth);
        gini_vals.push_back(rec.final_gini);
    }
    CorrelationReport rep;
    rep.n = static_cast<int>(wealth.size());
    if (rep.n < 3) {
        rep.note = "fewer than 3 SomeRich records";
        return rep;
    }
    const auto r = pearson_correlation(wealth, gini_vals);
    if (!r) {
        rep.note = "degenerate variance";
        return rep;
    }
    rep.defined = true;
    rep.r = *r;
    return rep;
}

enum class RegimeLevel { individual, community };

struct RegimeProfileEntry {
    Regime regime = Regime::all_poor;
    bool present = false;
    int n_runs = 0;
    std::array<double, 5> mean{};
    std::array<double, 5> sd{};
};

// Per-regime parameter means and spreads after min-max normalization, so the
// Table 1 bounds map exactly onto [0,1].
inline std::array<RegimeProfileEntry, 3>
regime_parameter_profile(const std::vector<RunRecord>& records,
                         const FreeParamBounds& bounds,
                         RegimeLevel level = RegimeLevel::individual) {
    const std::array<Bounds, 5> bd = {bounds.ell, bounds.g_upper, bounds.beta,
                                      bounds.theta, bounds.alpha};
    std::array<RegimeProfileEntry, 3> out;
    std::array<std::array<double, 5>, 3> sum{}, sum2{};
    std::array<int, 3> count{};
    for (const auto& rec : records) {
        if (!rec.ok) continue;
        const Regime regime = level == RegimeLevel::individual ? rec.individual_regime
                                                               : rec.community_regime;
        const auto g = static_cast<std::size_t>(regime);
        const auto vals = free_param_values(rec.params);
        for (std::size_t i = 0; i < 5; ++i) {
            const double x = (vals[i] - bd[i].lo) / (bd[i].hi - bd[i].lo);
            sum[g][i] += x;
            sum2[g][i] += x * x;
        }
        ++count[g];
    }
    for (std::size_t g = 0; g < 3; ++g) {
        out[g].regime = static_cast<Regime>(g);
        out[g].n_runs = count[g];
        if (count[g] == 0) continue;
        out[g].present = true;
        const auto n = static_cast<double>(count[g]);
        for (std::size_t i = 0; i < 5; ++i) {
            out[g].mean[i] = sum[g][i] / n;
            const double var = std::max(0.0, sum2[g][i] / n - out[g].mean[i] * out[g].mean[i]);
            out[g].sd[i] = std::sqrt(var);
        }
    }
    return out;
}

struct ProjectReturnSummary {
    // Indexed by individual regime. "all_step" averages count unfunded steps
    // as zero-return; "funded_step" averages only steps the project ran, and
    // skip projects that never ran.
    std::array<std::vector<double>, 3> all_step_averages;
    std::array<std::vector<double>, 3> funded_step_averages;
};

inline ProjectReturnSummary project_return_summary(const std::vector<RunRecord>& records) {
    ProjectReturnSummary out;
    for (const auto& rec : records) {
        if (!rec.ok) continue;
        const auto g = static_cast<std::size_t>(rec.individual_regime);
        for (std::size_t p = 0; p < rec.project_avg_factor.size(); ++p) {
            const double avg = rec.project_avg_factor[p];
            out.all_step_averages[g].push_back(avg);
            const int funded = rec.project_funded_steps[p];
            if (funded > 0)
                out.funded_step_averages[g].push_back(
                    avg * static_cast<double>(rec.steps) / static_cast<double>(funded));
        }
    }
    return out;
}

struct BimodalDemo {
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<double> sample;
    double mean = 0.0;
    double min = 0.0;
    double max = 0.0;
    std::vector<HistogramBin> bins;
};

// Pooling many two-peaked samples produces a single broad aggregate.
inline BimodalDemo bimodal_sum_demo(int k, std::uint64_t seed, int n_bins = 60) {
    BimodalDemo demo;
    demo.k = k;
    demo.seed = seed;
    demo.sample = pooled_bimodal_sample(k, seed);
    demo.min = demo.sample.front();
    demo.max = demo.sample.front();
    for (const double v : demo.sample) {
        demo.mean += v;
        demo.min = std::min(demo.min, v);
        demo.max = std::max(demo.max, v);
    }
    demo.mean /= static_cast<double>(demo.sample.size());
    demo.bins = histogram(demo.sample, n_bins);
    return demo;
}

}  // namespace povsim
