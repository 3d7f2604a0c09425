#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "povsim/rng.hpp"
#include "povsim/social_graph.hpp"

namespace povsim {

struct ConvergenceError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct CommunityAssignment {
    // Core label per node, compacted to 0..C-1 by first appearance.
    std::vector<int> core;
    // Sorted member lists per community.
    std::vector<std::vector<int>> members;
    // Per node: sorted list of accessible community ids (own plus every
    // community a direct neighbor belongs to).  Filled by extended_membership.
    std::vector<std::vector<int>> extended;

    int community_count() const { return static_cast<int>(members.size()); }
};

namespace detail {

// Greedy colouring in node order; nodes of one colour form an independent set
// and can be updated synchronously without label oscillation.
inline std::vector<int> greedy_colouring(const SocialGraph& g) {
    const int n = g.n_nodes();
    std::vector<int> colour(static_cast<std::size_t>(n), -1);
    std::vector<char> used;
    for (int v = 0; v < n; ++v) {
        used.assign(static_cast<std::size_t>(n), 0);
        for (int u : g.neighbors(v)) {
            const int cu = colour[static_cast<std::size_t>(u)];
            if (cu >= 0) used[static_cast<std::size_t>(cu)] = 1;
        }
        int c = 0;
        while (used[static_cast<std::size_t>(c)]) ++c;
        colour[static_cast<std::size_t>(v)] = c;
    }
    return colour;
}

}  // namespace detail

// Semi-synchronous label propagation.  Nodes start with their own label; each
// sweep processes colour classes in ascending order, updating every node of
// the class to a most frequent neighbour label (keeping the current label
// when it is among the tied maxima, otherwise drawing uniformly from the
// ties).  Stops at the first sweep with no label change; throws
// ConvergenceError after max_sweeps_factor * n sweeps.
inline CommunityAssignment detect_communities(const SocialGraph& g,
                                              std::uint64_t seed,
                                              int max_sweeps_factor = 100) {
    const int n = g.n_nodes();
    Rng rng(seed);
    const std::vector<int> colour = detail::greedy_colouring(g);
    const int n_colours = 1 + *std::max_element(colour.begin(), colour.end());
    std::vector<std::vector<int>> classes(static_cast<std::size_t>(n_colours));
    for (int v = 0; v < n; ++v)
        classes[static_cast<std::size_t>(colour[static_cast<std::size_t>(v)])].push_back(v);

    std::vector<int> label(static_cast<std::size_t>(n));
    for (int v = 0; v < n; ++v) label[static_cast<std::size_t>(v)] = v;

    std::vector<int> count(static_cast<std::size_t>(n), 0);
    std::vector<int> touched;
    std::vector<int> ties;
    std::vector<int> pending_node;
    std::vector<int> pending_label;

    const long max_sweeps = static_cast<long>(max_sweeps_factor) * n;
    long sweep = 0;
    bool changed = true;
    while (changed) {
        if (sweep++ >= max_sweeps)
            throw ConvergenceError("label propagation failed to converge after " +
                                   std::to_string(max_sweeps) + " sweeps");
        changed = false;
        for (const auto& cls : classes) {
            pending_node.clear();
            pending_label.clear();
            for (int v : cls) {
                const auto& nb = g.neighbors(v);
                if (nb.empty()) continue;
                touched.clear();
                int best = 0;
                for (int u : nb) {
                    const int lu = label[static_cast<std::size_t>(u)];
                    if (count[static_cast<std::size_t>(lu)]++ == 0) touched.push_back(lu);
                    if (count[static_cast<std::size_t>(lu)] > best)
                        best = count[static_cast<std::size_t>(lu)];
                }
                ties.clear();
                for (int l : touched)
                    if (count[static_cast<std::size_t>(l)] == best) ties.push_back(l);
                for (int l : touched) count[static_cast<std::size_t>(l)] = 0;

                const int cur = label[static_cast<std::size_t>(v)];
                int next = cur;
                if (std::find(ties.begin(), ties.end(), cur) == ties.end()) {
                    std::sort(ties.begin(), ties.end());
                    next = ties[static_cast<std::size_t>(
                        rng.uniform_int(static_cast<int>(ties.size())))];
                }
                if (next != cur) {
                    pending_node.push_back(v);
                    pending_label.push_back(next);
                }
            }
            for (std::size_t k = 0; k < pending_node.size(); ++k) {
                label[static_cast<std::size_t>(pending_node[k])] = pending_label[k];
                changed = true;
            }
        }
    }

    // Compact labels to 0..C-1 by first appearance in node order.
    CommunityAssignment out;
    out.core.assign(static_cast<std::size_t>(n), -1);
    std::vector<int> remap(static_cast<std::size_t>(n), -1);
    for (int v = 0; v < n; ++v) {
        const int l = label[static_cast<std::size_t>(v)];
        if (remap[static_cast<std::size_t>(l)] < 0) {
            remap[static_cast<std::size_t>(l)] = static_cast<int>(out.members.size());
            out.members.emplace_back();
        }
        const int c = remap[static_cast<std::size_t>(l)];
        out.core[static_cast<std::size_t>(v)] = c;
        out.members[static_cast<std::size_t>(c)].push_back(v);
    }
    return out;
}

// Fills `extended`: a node can access its own community plus every community
// one of its neighbours belongs to.
inline CommunityAssignment extended_membership(const SocialGraph& g,
                                               CommunityAssignment assignment) {
    const int n = g.n_nodes();
    if (static_cast<int>(assignment.core.size()) != n)
        throw std::invalid_argument("extended_membership: assignment size mismatch");
    assignment.extended.assign(static_cast<std::size_t>(n), {});
    for (int v = 0; v < n; ++v) {
        auto& acc = assignment.extended[static_cast<std::size_t>(v)];
        acc.push_back(assignment.core[static_cast<std::size_t>(v)]);
        for (int u : g.neighbors(v))
            acc.push_back(assignment.core[static_cast<std::size_t>(u)]);
        std::sort(acc.begin(), acc.end());
        acc.erase(std::unique(acc.begin(), acc.end()), acc.end());
    }
    return assignment;
}

struct GraphSummary {
    int community_count = 0;
    // size -> number of communities of that member count
    std::map<int, int> size_histogram;
    // degree -> number of communities adjacent to that many other communities
    std::map<int, int> degree_histogram;
};

// Community-level size and adjacency-degree distributions.  Two communities
// are adjacent when at least one graph edge crosses between them.
inline GraphSummary graph_distribution_summary(const SocialGraph& g,
                                               const CommunityAssignment& c) {
    GraphSummary out;
    out.community_count = c.community_count();
    for (const auto& m : c.members)
        ++out.size_histogram[static_cast<int>(m.size())];

    std::vector<std::vector<int>> adj(static_cast<std::size_t>(c.community_count()));
    for (const auto& [i, j] : g.edges()) {
        const int ci = c.core[static_cast<std::size_t>(i)];
        const int cj = c.core[static_cast<std::size_t>(j)];
        if (ci == cj) continue;
        adj[static_cast<std::size_t>(ci)].push_back(cj);
        adj[static_cast<std::size_t>(cj)].push_back(ci);
    }
    for (auto& a : adj) {
        std::sort(a.begin(), a.end());
        a.erase(std::unique(a.begin(), a.end()), a.end());
        ++out.degree_histogram[static_cast<int>(a.size())];
    }
    return out;
}

}  // namespace povsim
