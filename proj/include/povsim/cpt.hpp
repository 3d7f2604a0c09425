#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <stdexcept>
#include <vector>

namespace povsim {

struct CptParams {
    double gamma_plus = 10.0;   // gain curvature, > 0
    double gamma_minus = 50.0;  // loss curvature, > 0
    double delta_plus = 0.6;    // gain probability distortion, (0, 1]
    double delta_minus = 0.8;   // loss probability distortion, (0, 1]

    void validate() const {
        if (!(gamma_plus > 0.0) || !(gamma_minus > 0.0))
            throw std::invalid_argument("CptParams: curvatures must be > 0");
        if (!(delta_plus > 0.0 && delta_plus <= 1.0) ||
            !(delta_minus > 0.0 && delta_minus <= 1.0))
            throw std::invalid_argument("CptParams: distortions must lie in (0, 1]");
    }
};

// Exponential value function: bounded gains, convex-in-x losses.
inline double prospect_utility(double x, const CptParams& p) {
    if (x >= 0.0) return 1.0 - std::exp(-x * p.gamma_plus);
    return std::exp(x * p.gamma_minus) - 1.0;
}

// Inverse-S probability distortion; identity at delta == 1.
inline double probability_weight(double p, double delta) {
    if (!(p >= 0.0 && p <= 1.0))
        throw std::invalid_argument("probability_weight: p must lie in [0, 1]");
    if (!(delta > 0.0 && delta <= 1.0))
        throw std::invalid_argument("probability_weight: delta must lie in (0, 1]");
    if (p == 0.0) return 0.0;
    if (p == 1.0) return 1.0;
    const double pd = std::pow(p, delta);
    const double qd = std::pow(1.0 - p, delta);
    return pd / std::pow(pd + qd, 1.0 / delta);
}

struct DecisionWeights {
    // Both length N = n_pos + n_neg, indexed by ascending-magnitude rank of
    // the respective outcome class, zero elsewhere.
    std::vector<double> pi_plus;
    std::vector<double> pi_minus;
};

namespace detail {

// Rank-position weights for one outcome class: differences of the distorted
// cumulative probability at the equiprobable grid, then a monotonicity
// repair that substitutes the minimum for every rank before its first
// occurrence.  Index j = 1..n_class runs from least to most extreme outcome.
inline std::vector<double> class_weights(int n_class, int n_total, double delta) {
    std::vector<double> w(static_cast<std::size_t>(n_class));
    for (int j = 1; j <= n_class; ++j) {
        const double hi = static_cast<double>(n_class - j + 1) / n_total;
        const double lo = static_cast<double>(n_class - j) / n_total;
        w[static_cast<std::size_t>(j - 1)] =
            probability_weight(hi, delta) - probability_weight(lo, delta);
    }
    std::size_t arg_min = 0;
    for (std::size_t j = 1; j < w.size(); ++j)
        if (w[j] < w[arg_min]) arg_min = j;
    for (std::size_t j = 0; j < arg_min; ++j) w[j] = w[arg_min];
    return w;
}

}  // namespace detail

// Decision weights over N equiprobable scenarios split into n_pos gains and
// n_neg losses.  pi_plus holds zeros at the n_neg loss positions followed by
// the gain rank weights (ascending); pi_minus mirrors this for losses.
inline DecisionWeights decision_weights(int n_pos, int n_neg, const CptParams& p) {
    if (n_pos < 0 || n_neg < 0 || n_pos + n_neg < 1)
        throw std::invalid_argument("decision_weights: need n_pos + n_neg >= 1");
    p.validate();
    const int n = n_pos + n_neg;
    DecisionWeights out;
    out.pi_plus.assign(static_cast<std::size_t>(n), 0.0);
    out.pi_minus.assign(static_cast<std::size_t>(n), 0.0);
    if (n_pos > 0) {
        const auto w = detail::class_weights(n_pos, n, p.delta_plus);
        std::copy(w.begin(), w.end(), out.pi_plus.begin() + n_neg);
    }
    if (n_neg > 0) {
        const auto w = detail::class_weights(n_neg, n, p.delta_minus);
        std::copy(w.begin(), w.end(), out.pi_minus.begin() + n_pos);
    }
    return out;
}

// Scenario-by-asset net return matrix, row major.
struct ReturnMatrix {
    int n_assets = 0;
    std::vector<double> values;

    int n_scenarios() const {
        return n_assets == 0 ? 0 : static_cast<int>(values.size()) / n_assets;
    }
    double at(int s, int a) const {
        return values[static_cast<std::size_t>(s) * n_assets + a];
    }
    void push_row(std::span<const double> row) {
        if (static_cast<int>(row.size()) != n_assets)
            throw std::invalid_argument("ReturnMatrix: row width mismatch");
        values.insert(values.end(), row.begin(), row.end());
    }
};

// Scenario rows de-duplicated with multiplicities.  Many scenario matrices
// here have few distinct rows (two-point project outcomes, constant safe
// column), which makes portfolio evaluation nearly independent of the
// scenario count.
struct CollapsedReturns {
    int n_assets = 0;
    int n_scenarios = 0;
    std::vector<double> rows;   // distinct rows, row major
    std::vector<int> counts;    // multiplicity per distinct row

    int n_distinct() const { return static_cast<int>(counts.size()); }

    static CollapsedReturns from(const ReturnMatrix& m) {
        if (m.n_assets < 1 || m.n_scenarios() < 1)
            throw std::invalid_argument("CollapsedReturns: empty matrix");
        const int n = m.n_scenarios();
        const int a = m.n_assets;
        std::vector<int> order(static_cast<std::size_t>(n));
        std::iota(order.begin(), order.end(), 0);
        const auto less = [&](int x, int y) {
            for (int c = 0; c < a; ++c) {
                const double vx = m.at(x, c), vy = m.at(y, c);
                if (vx != vy) return vx < vy;
            }
            return false;
        };
        std::sort(order.begin(), order.end(), less);
        CollapsedReturns out;
        out.n_assets = a;
        out.n_scenarios = n;
        for (int k = 0; k < n; ++k) {
            const int s = order[static_cast<std::size_t>(k)];
            if (k > 0 && !less(order[static_cast<std::size_t>(k - 1)], s) &&
                !less(s, order[static_cast<std::size_t>(k - 1)])) {
                ++out.counts.back();
            } else {
                for (int c = 0; c < a; ++c) out.rows.push_back(m.at(s, c));
                out.counts.push_back(1);
            }
        }
        return out;
    }
};

// Evaluates the rank-dependent prospect value of portfolios against a fixed
// scenario matrix and preference parameters.  The distorted cumulative grid
// is precomputed once; each evaluation only sorts the distinct-row portfolio
// values and accumulates block weights through telescoped prefix sums of the
// (monotonicity-repaired) rank weights.
class CptEvaluator {
public:
    CptEvaluator(CollapsedReturns collapsed, const CptParams& params)
        : p_(params), c_(std::move(collapsed)) {
        p_.validate();
        build_grid(p_.delta_plus, wp_, min_val_p_, min_idx_p_);
        build_grid(p_.delta_minus, wm_, min_val_m_, min_idx_m_);
        v_.resize(static_cast<std::size_t>(c_.n_distinct()));
        order_.resize(v_.size());
    }

    CptEvaluator(const ReturnMatrix& m, const CptParams& params)
        : CptEvaluator(CollapsedReturns::from(m), params) {}

    int n_assets() const { return c_.n_assets; }
    int n_scenarios() const { return c_.n_scenarios; }
    const CptParams& params() const { return p_; }

    double utility(std::span<const double> weights) const {
        const int d = c_.n_distinct();
        const int a = c_.n_assets;
        for (int i = 0; i < d; ++i) {
            const double* row = c_.rows.data() + static_cast<std::size_t>(i) * a;
            double acc = 0.0;
            for (int j = 0; j < a; ++j) acc += row[j] * weights[static_cast<std::size_t>(j)];
            v_[static_cast<std::size_t>(i)] = acc;
        }
        std::iota(order_.begin(), order_.end(), 0);
        std::sort(order_.begin(), order_.end(),
                  [this](int x, int y) { return v_[static_cast<std::size_t>(x)] <
                                                v_[static_cast<std::size_t>(y)]; });

        int n_neg = 0;
        for (int i = 0; i < d; ++i)
            if (v_[static_cast<std::size_t>(i)] < 0.0) n_neg += c_.counts[static_cast<std::size_t>(i)];
        const int n_pos = c_.n_scenarios - n_neg;

        // Repair pivot per class: first ascending rank attaining the minimal
        // raw weight, located through the precomputed running minimum.
        int jp = 0;
        double amin_p = 0.0;
        if (n_pos > 0) {
            const int m_star = min_idx_p_[static_cast<std::size_t>(n_pos - 1)];
            jp = n_pos - m_star;
            amin_p = min_val_p_[static_cast<std::size_t>(n_pos - 1)];
        }
        int jm = 0;
        double amin_m = 0.0;
        if (n_neg > 0) {
            const int m_star = min_idx_m_[static_cast<std::size_t>(n_neg - 1)];
            jm = n_neg - m_star;
            amin_m = min_val_m_[static_cast<std::size_t>(n_neg - 1)];
        }
        const auto prefix = [](int mm, int n_class, int j_star, double amin,
                               const std::vector<double>& grid) {
            if (mm <= 0) return 0.0;
            if (mm < j_star) return mm * amin;
            return (j_star - 1) * amin + grid[static_cast<std::size_t>(n_class - j_star + 1)] -
                   grid[static_cast<std::size_t>(n_class - mm)];
        };

        double gains = 0.0, losses = 0.0;
        int cum = 0;
        for (int k = 0; k < d; ++k) {
            const int i = order_[static_cast<std::size_t>(k)];
            const double val = v_[static_cast<std::size_t>(i)];
            const int cnt = c_.counts[static_cast<std::size_t>(i)];
            if (val < 0.0) {
                const int j_hi = n_neg - cum;
                const double wt = prefix(j_hi, n_neg, jm, amin_m, wm_) -
                                  prefix(j_hi - cnt, n_neg, jm, amin_m, wm_);
                losses += wt * (1.0 - std::exp(val * p_.gamma_minus));
            } else {
                const int j_lo = cum - n_neg;
                const double wt = prefix(j_lo + cnt, n_pos, jp, amin_p, wp_) -
                                  prefix(j_lo, n_pos, jp, amin_p, wp_);
                gains += wt * (1.0 - std::exp(-val * p_.gamma_plus));
            }
            cum += cnt;
        }
        return gains - losses;
    }

private:
    void build_grid(double delta, std::vector<double>& grid,
                    std::vector<double>& run_min, std::vector<int>& run_idx) {
        const int n = c_.n_scenarios;
        grid.resize(static_cast<std::size_t>(n) + 1);
        for (int k = 0; k <= n; ++k)
            grid[static_cast<std::size_t>(k)] =
                probability_weight(static_cast<double>(k) / n, delta);
        run_min.resize(static_cast<std::size_t>(n));
        run_idx.resize(static_cast<std::size_t>(n));
        double best = grid[1] - grid[0];
        int best_at = 0;
        for (int m = 0; m < n; ++m) {
            const double inc = grid[static_cast<std::size_t>(m) + 1] - grid[static_cast<std::size_t>(m)];
            // <= keeps the largest index, i.e. the first ascending rank.
            if (inc <= best) {
                best = inc;
                best_at = m;
            }
            run_min[static_cast<std::size_t>(m)] = best;
            run_idx[static_cast<std::size_t>(m)] = best_at;
        }
    }

    CptParams p_;
    CollapsedReturns c_;
    std::vector<double> wp_, wm_;
    std::vector<double> min_val_p_, min_val_m_;
    std::vector<int> min_idx_p_, min_idx_m_;
    mutable std::vector<double> v_;
    mutable std::vector<int> order_;
};

struct Portfolio {
    std::vector<double> weights;

    int n_assets() const { return static_cast<int>(weights.size()); }
    void validate() const {
        if (weights.empty()) throw std::invalid_argument("Portfolio: empty");
        double sum = 0.0;
        for (double w : weights) {
            if (w < -1e-12) throw std::invalid_argument("Portfolio: negative weight");
            sum += w;
        }
        if (std::abs(sum - 1.0) > 1e-9)
            throw std::invalid_argument("Portfolio: weights must sum to 1");
    }
};

inline double cpt_utility(const Portfolio& portfolio, const ReturnMatrix& returns,
                          const CptParams& params) {
    portfolio.validate();
    if (portfolio.n_assets() != returns.n_assets)
        throw std::invalid_argument("cpt_utility: asset count mismatch");
    return CptEvaluator(returns, params).utility(portfolio.weights);
}

}  // namespace povsim
