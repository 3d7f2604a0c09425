#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <utility>
#include <vector>

#include "povsim/rng.hpp"

namespace povsim {

using WealthVector = std::vector<double>;

// N(mean, sd) initial endowments, truncated below at zero.
inline WealthVector sample_initial_wealth(int n, double mean, double sd,
                                          std::uint64_t seed) {
    if (n < 2) throw std::invalid_argument("sample_initial_wealth: need n >= 2");
    if (sd <= 0.0) throw std::invalid_argument("sample_initial_wealth: sd must be > 0");
    Rng rng(seed);
    WealthVector w(static_cast<std::size_t>(n));
    for (auto& x : w) x = std::max(0.0, rng.normal(mean, sd));
    return w;
}

// Mean absolute pairwise wealth distance divided by 15.  Computed from the
// sorted vector so the pair sum is O(n log n):
// sum_{i<j} |w_i - w_j| = sum_k (2k - n + 1) * w_(k)  with w_(k) ascending.
inline double characteristic_distance(const WealthVector& wealth) {
    const std::size_t n = wealth.size();
    if (n < 2) throw std::invalid_argument("characteristic_distance: need >= 2 agents");
    WealthVector s(wealth);
    std::sort(s.begin(), s.end());
    double total = 0.0;
    for (std::size_t k = 0; k < n; ++k) {
        total += (2.0 * static_cast<double>(k) - static_cast<double>(n) + 1.0) * s[k];
    }
    const double pairs = 0.5 * static_cast<double>(n) * static_cast<double>(n - 1);
    return (total / pairs) / 15.0;
}

// Connection probability 1 / (1 + (d/b)^alpha).  b == 0 (all wealth equal)
// degenerates to probability 1 for d == 0 and 0 otherwise.
inline double edge_probability(double d, double b, double alpha) {
    if (d < 0.0 || b < 0.0) throw std::invalid_argument("edge_probability: d and b must be >= 0");
    if (alpha <= 0.0) throw std::invalid_argument("edge_probability: alpha must be > 0");
    if (d == 0.0) return 1.0;
    if (b == 0.0) return 0.0;
    return 1.0 / (1.0 + std::pow(d / b, alpha));
}

class SocialGraph {
public:
    SocialGraph(int n, double alpha, double b)
        : alpha_(alpha), b_(b), adj_(static_cast<std::size_t>(n)) {
        if (n < 1) throw std::invalid_argument("SocialGraph: need n >= 1");
    }

    int n_nodes() const { return static_cast<int>(adj_.size()); }
    double alpha() const { return alpha_; }
    double characteristic_b() const { return b_; }

    void add_edge(int i, int j) {
        if (i == j) throw std::invalid_argument("SocialGraph: no self-loops");
        if (has_edge(i, j)) return;
        adj_[static_cast<std::size_t>(i)].push_back(j);
        adj_[static_cast<std::size_t>(j)].push_back(i);
        ++edge_count_;
    }

    bool has_edge(int i, int j) const {
        const auto& a = adj_[static_cast<std::size_t>(i)];
        return std::find(a.begin(), a.end(), j) != a.end();
    }

    const std::vector<int>& neighbors(int i) const {
        return adj_[static_cast<std::size_t>(i)];
    }

    std::size_t edge_count() const { return edge_count_; }

    // Edges as (i, j) with i < j, lexicographically sorted.
    std::vector<std::pair<int, int>> edges() const {
        std::vector<std::pair<int, int>> out;
        out.reserve(edge_count_);
        for (int i = 0; i < n_nodes(); ++i) {
            for (int j : adj_[static_cast<std::size_t>(i)]) {
                if (i < j) out.emplace_back(i, j);
            }
        }
        std::sort(out.begin(), out.end());
        return out;
    }

private:
    double alpha_;
    double b_;
    std::vector<std::vector<int>> adj_;
    std::size_t edge_count_ = 0;
};

// Components as sorted node lists, largest first (ties by smallest node id).
inline std::vector<std::vector<int>> connected_components(const SocialGraph& g) {
    const int n = g.n_nodes();
    std::vector<int> comp(static_cast<std::size_t>(n), -1);
    std::vector<std::vector<int>> out;
    std::vector<int> stack;
    for (int s = 0; s < n; ++s) {
        if (comp[static_cast<std::size_t>(s)] >= 0) continue;
        const int id = static_cast<int>(out.size());
        out.emplace_back();
        stack.push_back(s);
        comp[static_cast<std::size_t>(s)] = id;
        while (!stack.empty()) {
            const int v = stack.back();
            stack.pop_back();
            out[static_cast<std::size_t>(id)].push_back(v);
            for (int u : g.neighbors(v)) {
                if (comp[static_cast<std::size_t>(u)] < 0) {
                    comp[static_cast<std::size_t>(u)] = id;
                    stack.push_back(u);
                }
            }
        }
        std::sort(out[static_cast<std::size_t>(id)].begin(),
                  out[static_cast<std::size_t>(id)].end());
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const std::vector<int>& a, const std::vector<int>& b) {
                         if (a.size() != b.size()) return a.size() > b.size();
                         return a.front() < b.front();
                     });
    return out;
}

// Joins every minor component to the largest one: picks a uniformly random
// node from the minor component, then links it to the wealth-closest node of
// the largest component (ties broken by lower node id).  Adds exactly one
// edge per minor component and never removes edges.
inline SocialGraph repair_connectivity(SocialGraph g, const WealthVector& wealth,
                                       Rng& rng) {
    if (static_cast<int>(wealth.size()) != g.n_nodes())
        throw std::invalid_argument("repair_connectivity: wealth size mismatch");
    auto comps = connected_components(g);
    if (comps.size() <= 1) return g;
    const auto& base = comps.front();
    for (std::size_t c = 1; c < comps.size(); ++c) {
        const auto& minor = comps[c];
        const int pick = minor[static_cast<std::size_t>(
            rng.uniform_int(static_cast<int>(minor.size())))];
        int best = base.front();
        double best_d = std::abs(wealth[static_cast<std::size_t>(pick)] -
                                 wealth[static_cast<std::size_t>(best)]);
        for (int v : base) {
            const double d = std::abs(wealth[static_cast<std::size_t>(pick)] -
                                      wealth[static_cast<std::size_t>(v)]);
            if (d < best_d) {
                best_d = d;
                best = v;
            }
        }
        g.add_edge(pick, best);
    }
    return g;
}

// Homophilous random graph: each pair is linked with probability
// edge_probability(|w_i - w_j|, b, alpha), pairs visited in (i, j), i < j
// order, then connectivity is repaired.  Fully determined by the seed.
inline SocialGraph build_sda_graph(const WealthVector& wealth, double alpha,
                                   std::uint64_t seed) {
    const int n = static_cast<int>(wealth.size());
    const double b = characteristic_distance(wealth);
    SocialGraph g(n, alpha, b);
    Rng rng(seed);
    for (int i = 0; i < n; ++i) {
        for (int j = i + 1; j < n; ++j) {
            const double d = std::abs(wealth[static_cast<std::size_t>(i)] -
                                      wealth[static_cast<std::size_t>(j)]);
            if (rng.uniform() < edge_probability(d, b, alpha)) g.add_edge(i, j);
        }
    }
    return repair_connectivity(std::move(g), wealth, rng);
}

}  // namespace povsim
