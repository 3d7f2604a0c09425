#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

#include "povsim/cpt.hpp"
#include "povsim/rng.hpp"

namespace povsim {

struct OptimizerConfig {
    int random_starts = 20;       // seeded interior starts on top of the fixed ones
    double step_initial = 0.25;   // first transfer size
    double step_shrink = 0.25;    // multiplicative schedule
    double step_min = 1e-4;       // finest transfer size, always visited
    double min_improve = 1e-9;    // acceptance threshold per transfer
    int max_passes_per_level = 64;
};

namespace detail {

// Pairwise weight-transfer descent: repeatedly moves mass `step` from one
// asset to another whenever that improves the prospect value, shrinking the
// step until the finest level yields no improving transfer.
inline double refine_portfolio(const CptEvaluator& ev, std::vector<double>& w,
                               const OptimizerConfig& cfg,
                               std::vector<double>& scratch) {
    const int n = ev.n_assets();
    double best = ev.utility(w);
    if (n < 2) return best;

    std::vector<double> levels;
    for (double s = cfg.step_initial; s > cfg.step_min; s *= cfg.step_shrink)
        levels.push_back(s);
    levels.push_back(cfg.step_min);

    for (double step : levels) {
        bool improved = true;
        int passes = 0;
        while (improved && passes++ < cfg.max_passes_per_level) {
            improved = false;
            for (int a = 0; a < n; ++a) {
                if (w[static_cast<std::size_t>(a)] <= 0.0) continue;
                double t = std::min(step, w[static_cast<std::size_t>(a)]);
                for (int b = 0; b < n; ++b) {
                    if (b == a) continue;
                    scratch = w;
                    scratch[static_cast<std::size_t>(a)] -= t;
                    if (scratch[static_cast<std::size_t>(a)] < 1e-15)
                        scratch[static_cast<std::size_t>(a)] = 0.0;
                    scratch[static_cast<std::size_t>(b)] += t;
                    const double u = ev.utility(scratch);
                    if (u > best + cfg.min_improve) {
                        w.swap(scratch);
                        best = u;
                        improved = true;
                        if (w[static_cast<std::size_t>(a)] <= 0.0) break;
                        t = std::min(step, w[static_cast<std::size_t>(a)]);
                    }
                }
            }
        }
    }
    return best;
}

}  // namespace detail

// Multi-start search over the probability simplex.  The candidate set is
// every single-asset portfolio, the uniform portfolio, and `random_starts`
// seeded Dirichlet(1) draws; each candidate is refined by pairwise
// weight-transfer descent and the best refined point wins.  Deterministic
// given the seed.
inline Portfolio optimize_portfolio(const CptEvaluator& ev, std::uint64_t seed,
                                    const OptimizerConfig& cfg = {}) {
    const int n = ev.n_assets();
    Rng rng(seed);

    std::vector<double> best_w;
    double best_u = 0.0;
    bool have = false;
    std::vector<double> cand(static_cast<std::size_t>(n));
    std::vector<double> scratch(static_cast<std::size_t>(n));

    const auto consider = [&](std::vector<double>& w) {
        const double u = detail::refine_portfolio(ev, w, cfg, scratch);
        if (!have || u > best_u) {
            best_u = u;
            best_w = w;
            have = true;
        }
    };

    for (int a = 0; a < n; ++a) {
        std::fill(cand.begin(), cand.end(), 0.0);
        cand[static_cast<std::size_t>(a)] = 1.0;
        consider(cand);
    }
    std::fill(cand.begin(), cand.end(), 1.0 / n);
    consider(cand);
    for (int r = 0; r < cfg.random_starts; ++r) {
        double sum = 0.0;
        for (int a = 0; a < n; ++a) {
            const double g = -std::log(1.0 - rng.uniform());
            cand[static_cast<std::size_t>(a)] = g;
            sum += g;
        }
        if (sum <= 0.0) {
            std::fill(cand.begin(), cand.end(), 1.0 / n);
        } else {
            for (auto& x : cand) x /= sum;
        }
        consider(cand);
    }
    return Portfolio{std::move(best_w)};
}

inline Portfolio optimize_portfolio(const ReturnMatrix& returns,
                                    const CptParams& params, std::uint64_t seed,
                                    const OptimizerConfig& cfg = {}) {
    return optimize_portfolio(CptEvaluator(returns, params), seed, cfg);
}

// Convex blend: keeps share (1 - attention) of the habitual portfolio and
// moves share `attention` toward the newly computed one.
inline Portfolio attention_update(const Portfolio& habitual, const Portfolio& observed,
                                  double attention) {
    if (habitual.n_assets() != observed.n_assets())
        throw std::invalid_argument("attention_update: asset count mismatch");
    if (!(attention >= 0.0 && attention <= 1.0))
        throw std::invalid_argument("attention_update: attention must lie in [0, 1]");
    Portfolio out;
    out.weights.resize(habitual.weights.size());
    for (std::size_t i = 0; i < out.weights.size(); ++i)
        out.weights[i] = (1.0 - attention) * habitual.weights[i] +
                         attention * observed.weights[i];
    return out;
}

// Strictly increasing revision times: cumulative sums of Poisson(rate) gaps
// (zero gaps coerced to one step), kept when they land in (5, horizon].
inline std::vector<int> sample_update_times(double rate, int horizon, Rng& rng) {
    if (rate < 0.0) throw std::invalid_argument("sample_update_times: rate must be >= 0");
    if (horizon < 0) throw std::invalid_argument("sample_update_times: horizon must be >= 0");
    std::vector<int> out;
    long t = 0;
    while (true) {
        int gap = rng.poisson(rate);
        if (gap == 0) gap = 1;
        t += gap;
        if (t > horizon) break;
        if (t > 5) out.push_back(static_cast<int>(t));
    }
    return out;
}

inline std::vector<int> sample_update_times(double rate, int horizon,
                                            std::uint64_t seed) {
    Rng rng(seed);
    return sample_update_times(rate, horizon, rng);
}

}  // namespace povsim
