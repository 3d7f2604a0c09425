#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "povsim/communities.hpp"
#include "povsim/cpt.hpp"
#include "povsim/portfolio.hpp"
#include "povsim/rng.hpp"
#include "povsim/social_graph.hpp"

namespace povsim {

// Stream tags feeding derive_seed; every random decision in a run hangs off
// the run seed through exactly one of these.
namespace streams {
constexpr std::uint64_t wealth = 1;
constexpr std::uint64_t graph = 2;
constexpr std::uint64_t communities = 3;
constexpr std::uint64_t projects = 4;
constexpr std::uint64_t initial_returns = 5;
constexpr std::uint64_t agent_init = 6;
constexpr std::uint64_t agent_opt = 7;
constexpr std::uint64_t step_outcomes = 8;
constexpr std::uint64_t ensemble = 9;
constexpr std::uint64_t intervention = 10;
constexpr std::uint64_t bootstrap = 11;
}  // namespace streams

struct Bounds {
    double lo = 0.0;
    double hi = 0.0;
    bool contains(double x) const { return x >= lo && x <= hi; }
};

// The five swept parameters.
struct FreeParams {
    double ell = 0.35;      // loss-probability margin
    double g_upper = 4.0;   // upper bound of the project gain factor
    double beta = 0.75;     // invested share of wealth
    double theta = 0.10;    // funding threshold share
    double alpha = 6.0;     // homophily exponent
};

struct FreeParamBounds {
    Bounds ell{0.30, 0.45};
    Bounds g_upper{1.70, 8.00};
    Bounds beta{0.70, 0.80};
    Bounds theta{0.01, 0.20};
    Bounds alpha{2.00, 12.00};

    void validate(const FreeParams& p) const {
        if (!ell.contains(p.ell)) throw std::invalid_argument("ell out of bounds");
        if (!g_upper.contains(p.g_upper)) throw std::invalid_argument("g_upper out of bounds");
        if (!beta.contains(p.beta)) throw std::invalid_argument("beta out of bounds");
        if (!theta.contains(p.theta)) throw std::invalid_argument("theta out of bounds");
        if (!alpha.contains(p.alpha)) throw std::invalid_argument("alpha out of bounds");
    }
};

// Everything held fixed across the sweep.
struct FixedParams {
    int n_agents = 1225;
    int n_steps = 100;
    double update_rate = 10.0;          // mean revision gap
    double wealth_mean = 10.0;
    double wealth_sd = 1.0;
    int n_prospect_scenarios = 2000;    // rows of the prospective return matrix
    double loss_factor_lo = 0.90;
    double loss_factor_hi = 0.95;
    double gain_factor_lo = 1.60;
    double safe_factor = 1.10;
    double gamma_plus_lo = 5.0, gamma_plus_hi = 30.0;
    double gamma_minus_lo = 31.0, gamma_minus_hi = 70.0;
    double delta_plus_lo = 0.50, delta_plus_hi = 0.70;
    double delta_minus_lo = 0.71, delta_minus_hi = 0.90;
    FreeParamBounds bounds;
    OptimizerConfig optimizer;

    void validate() const {
        if (n_agents < 2) throw std::invalid_argument("n_agents must be >= 2");
        if (n_steps < 1) throw std::invalid_argument("n_steps must be >= 1");
        if (update_rate < 0.0) throw std::invalid_argument("update_rate must be >= 0");
        if (wealth_sd <= 0.0) throw std::invalid_argument("wealth_sd must be > 0");
        if (n_prospect_scenarios < 1)
            throw std::invalid_argument("n_prospect_scenarios must be >= 1");
        if (!(loss_factor_lo <= loss_factor_hi && loss_factor_lo > 0.0))
            throw std::invalid_argument("loss factor bounds invalid");
        if (!(gain_factor_lo > loss_factor_hi))
            throw std::invalid_argument("gain factor bound invalid");
        if (!(safe_factor > 0.0)) throw std::invalid_argument("safe_factor must be > 0");
    }
};

// A community project: two-point step return, funded only when the pooled
// stake reaches min_investment.
struct RiskyProject {
    int community = -1;
    double p_loss = 0.0;
    double loss_factor = 1.0;
    double gain_factor = 1.0;
    double min_investment = 0.0;

    double expected_factor() const {
        return p_loss * loss_factor + (1.0 - p_loss) * gain_factor;
    }
};

// Draws a project.  Draw order is pinned (loss probability, loss factor,
// gain factor) so runs replay exactly.  The parameter ranges keep the
// expected step factor at or above the safe factor by construction.
inline RiskyProject generate_project(double ell, double g_upper,
                                     double eligible_wealth, double theta,
                                     Rng& rng, const FixedParams& fixed = {}) {
    if (!(ell > 0.0 && ell < 0.5))
        throw std::invalid_argument("generate_project: ell must lie in (0, 0.5)");
    if (!(g_upper >= fixed.gain_factor_lo))
        throw std::invalid_argument("generate_project: g_upper below lower gain bound");
    if (eligible_wealth < 0.0)
        throw std::invalid_argument("generate_project: eligible wealth must be >= 0");
    if (theta < 0.0) throw std::invalid_argument("generate_project: theta must be >= 0");
    RiskyProject p;
    p.p_loss = rng.uniform(ell, 1.0 - ell);
    p.loss_factor = rng.uniform(fixed.loss_factor_lo, fixed.loss_factor_hi);
    p.gain_factor = rng.uniform(fixed.gain_factor_lo, g_upper);
    p.min_investment = theta * eligible_wealth;
    return p;
}

inline RiskyProject generate_project(double ell, double g_upper,
                                     double eligible_wealth, double theta,
                                     std::uint64_t seed, const FixedParams& fixed = {}) {
    Rng rng(seed);
    return generate_project(ell, g_upper, eligible_wealth, theta, rng, fixed);
}

// Realized step factor.  Always consumes exactly one draw so the outcome
// stream does not depend on funding status; an unfunded project wipes the
// stake (factor 0).
inline double project_step_return(const RiskyProject& p, double pooled, Rng& rng) {
    const double u = rng.uniform();
    if (pooled < p.min_investment) return 0.0;
    return u < p.p_loss ? p.loss_factor : p.gain_factor;
}

inline double project_step_return(const RiskyProject& p, double pooled,
                                  std::uint64_t seed) {
    Rng rng(seed);
    return project_step_return(p, pooled, rng);
}

// Prospective gross factor matrix: one i.i.d. two-point column per project
// (funding thresholds ignored) plus a constant safe column, safe last.
// Rows are drawn scenario-major.
inline ReturnMatrix sample_initial_returns(const std::vector<RiskyProject>& projects,
                                           double safe_factor, int n_scenarios,
                                           std::uint64_t seed) {
    if (n_scenarios < 1)
        throw std::invalid_argument("sample_initial_returns: need n_scenarios >= 1");
    Rng rng(seed);
    ReturnMatrix m;
    m.n_assets = static_cast<int>(projects.size()) + 1;
    m.values.reserve(static_cast<std::size_t>(n_scenarios) * m.n_assets);
    for (int s = 0; s < n_scenarios; ++s) {
        for (const auto& p : projects) {
            const double u = rng.uniform();
            m.values.push_back(u < p.p_loss ? p.loss_factor : p.gain_factor);
        }
        m.values.push_back(safe_factor);
    }
    return m;
}

// Budget split at the start of a step.
inline std::pair<double, double> consume(double wealth, double beta) {
    if (wealth < 0.0) throw std::invalid_argument("consume: wealth must be >= 0");
    if (!(beta >= 0.0 && beta <= 1.0))
        throw std::invalid_argument("consume: beta must lie in [0, 1]");
    const double invested = beta * wealth;
    return {wealth - invested, invested};
}

enum class PortfolioPolicy {
    prospect,   // full preference-driven behaviour
    safe_only,  // diagnostic: everyone holds the safe asset, no revisions
};

struct AgentState {
    CptParams prefs;
    double attention = 0.5;
    std::vector<int> update_times;
    std::vector<int> accessible;   // community ids, ascending; safe asset is
                                   // implicitly the last portfolio slot
    Portfolio initial;
    Portfolio current;
};

// Optional mid-run capital grant: after `after_step` steps finish, `amount`
// is added to the `target_count` poorest agents (ties broken by lower id).
struct WealthInjection {
    int after_step = 0;
    double amount = 0.0;
    int target_count = 0;
};

struct SimulationResult {
    int n_agents = 0;
    int n_steps = 0;
    double b = 0.0;
    std::size_t edge_count = 0;
    WealthVector initial_wealth;
    std::vector<double> wealth;            // n_agents x (n_steps + 1), row major
    CommunityAssignment communities;
    std::vector<RiskyProject> projects;
    std::vector<double> project_factors;   // projects x n_steps, 0 when unfunded
    std::vector<std::uint8_t> project_funded;
    std::vector<double> pooled_investment;
    std::vector<AgentState> agents;
    std::vector<int> injection_targets;    // agents granted capital, if any

    double wealth_at(int agent, int t) const {
        return wealth[static_cast<std::size_t>(agent) * (n_steps + 1) + t];
    }
    double final_wealth(int agent) const { return wealth_at(agent, n_steps); }
    double factor_at(int project, int t) const {  // t in 1..n_steps
        return project_factors[static_cast<std::size_t>(project) * n_steps + (t - 1)];
    }
    bool funded_at(int project, int t) const {
        return project_funded[static_cast<std::size_t>(project) * n_steps + (t - 1)] != 0;
    }
    int funded_step_count(int project) const {
        int c = 0;
        for (int t = 1; t <= n_steps; ++t) c += funded_at(project, t) ? 1 : 0;
        return c;
    }
};

namespace detail {

inline ReturnMatrix submatrix_with_safe(const ReturnMatrix& gross,
                                        const std::vector<int>& projects_cols,
                                        double net_shift) {
    ReturnMatrix out;
    out.n_assets = static_cast<int>(projects_cols.size()) + 1;
    const int rows = gross.n_scenarios();
    out.values.reserve(static_cast<std::size_t>(rows) * out.n_assets);
    const int safe_col = gross.n_assets - 1;
    for (int s = 0; s < rows; ++s) {
        for (int c : projects_cols) out.values.push_back(gross.at(s, c) + net_shift);
        out.values.push_back(gross.at(s, safe_col) + net_shift);
    }
    return out;
}

}  // namespace detail

// One full run of the wealth process.  Deterministic in (params, fixed,
// seed); the ordering of every draw is pinned by the stream tags above.
inline SimulationResult simulate(const FreeParams& params, const FixedParams& fixed,
                                 std::uint64_t seed,
                                 PortfolioPolicy policy = PortfolioPolicy::prospect,
                                 const WealthInjection* injection = nullptr) {
    fixed.validate();
    fixed.bounds.validate(params);
    const int n = fixed.n_agents;
    const int steps = fixed.n_steps;

    SimulationResult res;
    res.n_agents = n;
    res.n_steps = steps;
    res.initial_wealth = sample_initial_wealth(
        n, fixed.wealth_mean, fixed.wealth_sd, derive_seed(seed, streams::wealth));

    SocialGraph g = build_sda_graph(res.initial_wealth, params.alpha,
                                    derive_seed(seed, streams::graph));
    res.b = g.characteristic_b();
    res.edge_count = g.edge_count();
    res.communities = extended_membership(
        g, detect_communities(g, derive_seed(seed, streams::communities)));
    const int n_proj = res.communities.community_count();

    // Funding thresholds anchor to the wealth of everyone able to invest in
    // the project at the start, not just core members.
    std::vector<double> eligible(static_cast<std::size_t>(n_proj), 0.0);
    for (int i = 0; i < n; ++i)
        for (int c : res.communities.extended[static_cast<std::size_t>(i)])
            eligible[static_cast<std::size_t>(c)] += res.initial_wealth[static_cast<std::size_t>(i)];

    Rng proj_rng(derive_seed(seed, streams::projects));
    res.projects.reserve(static_cast<std::size_t>(n_proj));
    for (int c = 0; c < n_proj; ++c) {
        RiskyProject p = generate_project(params.ell, params.g_upper,
                                          eligible[static_cast<std::size_t>(c)],
                                          params.theta, proj_rng, fixed);
        p.community = c;
        res.projects.push_back(p);
    }

    const ReturnMatrix gross0 =
        sample_initial_returns(res.projects, fixed.safe_factor,
                               fixed.n_prospect_scenarios,
                               derive_seed(seed, streams::initial_returns));

    // Distinct-row collapse of the prospective matrix is shared across agents
    // with the same accessible set; preference grids stay per agent.
    std::map<std::vector<int>, std::shared_ptr<const CollapsedReturns>> collapse_cache;
    const auto collapsed_for = [&](const std::vector<int>& cols) {
        auto it = collapse_cache.find(cols);
        if (it != collapse_cache.end()) return it->second;
        auto c = std::make_shared<const CollapsedReturns>(
            CollapsedReturns::from(detail::submatrix_with_safe(gross0, cols, -1.0)));
        collapse_cache.emplace(cols, c);
        return c;
    };

    res.agents.resize(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        AgentState& a = res.agents[static_cast<std::size_t>(i)];
        Rng ar(derive_seed(seed, streams::agent_init, static_cast<std::uint64_t>(i)));
        a.prefs.gamma_plus = ar.uniform(fixed.gamma_plus_lo, fixed.gamma_plus_hi);
        a.prefs.gamma_minus = ar.uniform(fixed.gamma_minus_lo, fixed.gamma_minus_hi);
        a.prefs.delta_plus = ar.uniform(fixed.delta_plus_lo, fixed.delta_plus_hi);
        a.prefs.delta_minus = ar.uniform(fixed.delta_minus_lo, fixed.delta_minus_hi);
        a.attention = ar.uniform();
        a.update_times = sample_update_times(fixed.update_rate, steps, ar);
        a.accessible = res.communities.extended[static_cast<std::size_t>(i)];
        const int n_assets = static_cast<int>(a.accessible.size()) + 1;
        if (policy == PortfolioPolicy::safe_only) {
            a.initial.weights.assign(static_cast<std::size_t>(n_assets), 0.0);
            a.initial.weights.back() = 1.0;
        } else {
            CptEvaluator ev(*collapsed_for(a.accessible), a.prefs);
            a.initial = optimize_portfolio(
                ev, derive_seed(seed, streams::agent_opt,
                                pack_index(static_cast<std::uint64_t>(i), 0)),
                fixed.optimizer);
        }
        a.current = a.initial;
    }

    res.wealth.assign(static_cast<std::size_t>(n) * (steps + 1), 0.0);
    for (int i = 0; i < n; ++i)
        res.wealth[static_cast<std::size_t>(i) * (steps + 1)] =
            res.initial_wealth[static_cast<std::size_t>(i)];
    res.project_factors.assign(static_cast<std::size_t>(n_proj) * steps, 0.0);
    res.project_funded.assign(static_cast<std::size_t>(n_proj) * steps, 0);
    res.pooled_investment.assign(static_cast<std::size_t>(n_proj) * steps, 0.0);

    std::vector<double> invested(static_cast<std::size_t>(n), 0.0);
    std::vector<double> pooled(static_cast<std::size_t>(n_proj), 0.0);
    std::vector<double> factor(static_cast<std::size_t>(n_proj), 0.0);
    ReturnMatrix obs;

    for (int t = 1; t <= steps; ++t) {
        if (policy == PortfolioPolicy::prospect) {
            for (int i = 0; i < n; ++i) {
                AgentState& a = res.agents[static_cast<std::size_t>(i)];
                if (!std::binary_search(a.update_times.begin(), a.update_times.end(), t))
                    continue;
                // Observed history through step t-1, net returns; unfunded
                // steps appear as total loss.
                obs.n_assets = static_cast<int>(a.accessible.size()) + 1;
                obs.values.clear();
                for (int s = 1; s < t; ++s) {
                    for (int c : a.accessible)
                        obs.values.push_back(res.factor_at(c, s) - 1.0);
                    obs.values.push_back(fixed.safe_factor - 1.0);
                }
                CptEvaluator ev(CollapsedReturns::from(obs), a.prefs);
                const Portfolio observed = optimize_portfolio(
                    ev, derive_seed(seed, streams::agent_opt,
                                    pack_index(static_cast<std::uint64_t>(i),
                                               static_cast<std::uint64_t>(t))),
                    fixed.optimizer);
                a.current = attention_update(a.initial, observed, a.attention);
            }
        }

        std::fill(pooled.begin(), pooled.end(), 0.0);
        for (int i = 0; i < n; ++i) {
            const AgentState& a = res.agents[static_cast<std::size_t>(i)];
            invested[static_cast<std::size_t>(i)] =
                consume(res.wealth_at(i, t - 1), params.beta).second;
            for (std::size_t k = 0; k < a.accessible.size(); ++k)
                pooled[static_cast<std::size_t>(a.accessible[k])] +=
                    invested[static_cast<std::size_t>(i)] * a.current.weights[k];
        }

        Rng step_rng(derive_seed(seed, streams::step_outcomes,
                                 static_cast<std::uint64_t>(t)));
        for (int p = 0; p < n_proj; ++p) {
            const std::size_t idx = static_cast<std::size_t>(p) * steps + (t - 1);
            factor[static_cast<std::size_t>(p)] =
                project_step_return(res.projects[static_cast<std::size_t>(p)],
                                    pooled[static_cast<std::size_t>(p)], step_rng);
            res.project_factors[idx] = factor[static_cast<std::size_t>(p)];
            res.project_funded[idx] =
                pooled[static_cast<std::size_t>(p)] >=
                        res.projects[static_cast<std::size_t>(p)].min_investment
                    ? 1
                    : 0;
            res.pooled_investment[idx] = pooled[static_cast<std::size_t>(p)];
        }

        for (int i = 0; i < n; ++i) {
            const AgentState& a = res.agents[static_cast<std::size_t>(i)];
            double ret = 0.0;
            for (std::size_t k = 0; k < a.accessible.size(); ++k)
                ret += a.current.weights[k] *
                       factor[static_cast<std::size_t>(a.accessible[k])];
            ret += a.current.weights.back() * fixed.safe_factor;
            res.wealth[static_cast<std::size_t>(i) * (steps + 1) + t] =
                invested[static_cast<std::size_t>(i)] * ret;
        }

        if (injection != nullptr && t == injection->after_step &&
            injection->target_count > 0) {
            std::vector<int> order(static_cast<std::size_t>(n));
            std::iota(order.begin(), order.end(), 0);
            std::sort(order.begin(), order.end(), [&](int x, int y) {
                const double wx = res.wealth_at(x, t), wy = res.wealth_at(y, t);
                if (wx != wy) return wx < wy;
                return x < y;
            });
            const int m = std::min(injection->target_count, n);
            res.injection_targets.assign(order.begin(), order.begin() + m);
            std::sort(res.injection_targets.begin(), res.injection_targets.end());
            for (int k = 0; k < m; ++k)
                res.wealth[static_cast<std::size_t>(order[static_cast<std::size_t>(k)]) *
                               (steps + 1) +
                           t] += injection->amount;
        }
    }
    return res;
}

}  // namespace povsim
