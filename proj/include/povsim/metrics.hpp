#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <map>
#include <optional>
#include <stdexcept>
#include <vector>

#include <povsim/economy.hpp>
#include <povsim/rng.hpp>

namespace povsim {

// Mean absolute difference between all pairs, normalised by twice the mean.
// Zero for empty-dispersion and all-zero inputs; negatives are rejected.
inline double gini(std::vector<double> values) {
    if (values.empty()) throw std::invalid_argument("gini: empty input");
    double sum = 0.0;
    for (const double v : values) {
        if (!(v >= 0.0)) throw std::invalid_argument("gini: negative value");
        sum += v;
    }
    if (sum <= 0.0) return 0.0;
    std::sort(values.begin(), values.end());
    const auto n = static_cast<double>(values.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < values.size(); ++k)
        acc += (2.0 * static_cast<double>(k) + 1.0 - n) * values[k];
    return acc / (n * sum);
}

inline std::optional<double> pearson_correlation(const std::vector<double>& xs,
                                                 const std::vector<double>& ys) {
    if (xs.size() != ys.size())
        throw std::invalid_argument("pearson_correlation: size mismatch");
    const std::size_t n = xs.size();
    if (n < 2) return std::nullopt;
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += xs[i];
        my += ys[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double sxx = 0.0, syy = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double dx = xs[i] - mx, dy = ys[i] - my;
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
    return sxy / std::sqrt(sxx * syy);
}

// Linear-interpolation quantile on a sorted copy (the common "type 7" rule).
inline double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile: empty input");
    if (!(q >= 0.0 && q <= 1.0)) throw std::invalid_argument("quantile: q outside [0,1]");
    std::sort(values.begin(), values.end());
    const double h = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(h);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = h - static_cast<double>(lo);
    return values[lo] + frac * (values[lo + 1] - values[lo]);
}

struct InequalityDecomposition {
    double horizontal = 0.0;  // dispersion of community totals
    double vertical = 0.0;    // size-weighted within-community dispersion
};

inline InequalityDecomposition
inequality_decomposition(const SimulationResult& res) {
    const int n_comm = res.communities.community_count();
    std::vector<std::vector<double>> finals(static_cast<std::size_t>(n_comm));
    for (int i = 0; i < res.n_agents; ++i)
        finals[static_cast<std::size_t>(res.communities.core[static_cast<std::size_t>(i)])]
            .push_back(res.final_wealth(i));

    std::vector<double> totals;
    totals.reserve(finals.size());
    InequalityDecomposition out;
    for (const auto& f : finals) {
        double tot = 0.0;
        for (const double w : f) tot += w;
        totals.push_back(tot);
        out.vertical += static_cast<double>(f.size()) /
                        static_cast<double>(res.n_agents) * gini(f);
    }
    out.horizontal = gini(std::move(totals));
    return out;
}

struct AccessWealthBucket {
    int membership_count = 0;  // communities the agent can invest through
    int n_agents = 0;
    double mean = 0.0;
    double q10 = 0.0;
    double median = 0.0;
    double q90 = 0.0;
};

// Final wealth distribution grouped by how many communities each agent reaches.
inline std::vector<AccessWealthBucket>
access_wealth_summary(const SimulationResult& res) {
    std::map<int, std::vector<double>> groups;
    for (int i = 0; i < res.n_agents; ++i) {
        const auto& ext = res.communities.extended[static_cast<std::size_t>(i)];
        groups[static_cast<int>(ext.size())].push_back(res.final_wealth(i));
    }
    std::vector<AccessWealthBucket> out;
    out.reserve(groups.size());
    for (auto& [count, values] : groups) {
        AccessWealthBucket b;
        b.membership_count = count;
        b.n_agents = static_cast<int>(values.size());
        for (const double v : values) b.mean += v;
        b.mean /= static_cast<double>(values.size());
        b.q10 = quantile(values, 0.10);
        b.median = quantile(values, 0.50);
        b.q90 = quantile(values, 0.90);
        out.push_back(std::move(b));
    }
    return out;
}

struct HistogramBin {
    double left = 0.0;
    double right = 0.0;
    long count = 0;
};

inline std::vector<HistogramBin> histogram(const std::vector<double>& values,
                                           int n_bins) {
    if (values.empty()) throw std::invalid_argument("histogram: empty input");
    if (n_bins < 1) throw std::invalid_argument("histogram: need at least one bin");
    const auto [mn_it, mx_it] = std::minmax_element(values.begin(), values.end());
    double lo = *mn_it, hi = *mx_it;
    if (hi <= lo) hi = lo + 1.0;
    const double width = (hi - lo) / static_cast<double>(n_bins);
    std::vector<HistogramBin> bins(static_cast<std::size_t>(n_bins));
    for (int b = 0; b < n_bins; ++b) {
        bins[static_cast<std::size_t>(b)].left = lo + width * b;
        bins[static_cast<std::size_t>(b)].right = lo + width * (b + 1);
    }
    for (const double v : values) {
        auto idx = static_cast<std::size_t>((v - lo) / width);
        if (idx >= bins.size()) idx = bins.size() - 1;
        ++bins[idx].count;
    }
    return bins;
}

// Pools k two-peaked samples (two normal batches of 1000 draws each, peak
// locations uniform on [500,800], spreads uniform on [10,50]). The pooled
// aggregate loses the individual bimodal shape as k grows.
inline std::vector<double> pooled_bimodal_sample(int k, std::uint64_t seed) {
    if (k < 1) throw std::invalid_argument("pooled_bimodal_sample: k must be positive");
    Rng rng(seed);
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(k) * 2000);
    for (int s = 0; s < k; ++s) {
        for (int peak = 0; peak < 2; ++peak) {
            const double mean = rng.uniform(500.0, 800.0);
            const double sd = rng.uniform(10.0, 50.0);
            for (int d = 0; d < 1000; ++d) out.push_back(rng.normal(mean, sd));
        }
    }
    return out;
}

}  // namespace povsim
