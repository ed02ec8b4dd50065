#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "sleepeda/cg_score.hpp"
#include "sleepeda/dataset.hpp"
#include "sleepeda/errors.hpp"
#include "sleepeda/graph.hpp"

namespace sleepeda {

namespace detail {

inline bool is_clique(const Pdag& g, const std::set<int>& nodes) {
    for (auto it1 = nodes.begin(); it1 != nodes.end(); ++it1)
        for (auto it2 = std::next(it1); it2 != nodes.end(); ++it2)
            if (!g.adjacent(*it1, *it2)) return false;
    return true;
}

// True when every semi-directed path from `from` to `to` passes through
// `blocked`. Semi-directed steps follow undirected edges or edges directed
// out of the current node.
inline bool all_semi_directed_paths_blocked(const Pdag& g, int from, int to,
                                            const std::set<int>& blocked) {
    if (from == to) return false;
    std::vector<int> stack{from};
    std::vector<bool> seen(g.size(), false);
    seen[static_cast<std::size_t>(from)] = true;
    while (!stack.empty()) {
        const int u = stack.back();
        stack.pop_back();
        for (int v = 0; v < static_cast<int>(g.size()); ++v) {
            if (seen[static_cast<std::size_t>(v)] || blocked.count(v)) continue;
            if (!g.has_undirected(u, v) && !g.has_directed(u, v)) continue;
            if (v == to) return false;
            seen[static_cast<std::size_t>(v)] = true;
            stack.push_back(v);
        }
    }
    return true;
}

// Subsets of `pool` in deterministic order: by increasing size, then by the
// lexicographic order of the sorted member list.
inline std::vector<std::vector<int>> ordered_subsets(std::vector<int> pool) {
    std::sort(pool.begin(), pool.end());
    std::vector<std::vector<int>> out;
    const std::size_t total = std::size_t{1} << pool.size();
    for (std::size_t mask = 0; mask < total; ++mask) {
        std::vector<int> subset;
        for (std::size_t i = 0; i < pool.size(); ++i)
            if (mask & (std::size_t{1} << i)) subset.push_back(pool[i]);
        out.push_back(std::move(subset));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const auto& a, const auto& b) { return a.size() < b.size(); });
    return out;
}

// Undirected neighbors of y that are adjacent to x.
inline std::set<int> na_set(const Pdag& g, int y, int x) {
    std::set<int> out;
    for (int v : g.neighbors_undirected(y))
        if (g.adjacent(v, x)) out.insert(v);
    return out;
}

inline Cpdag rebuild_cpdag(const Pdag& g) { return dag_to_cpdag(pdag_to_dag(g)); }

}  // namespace detail

struct FgsResult {
    Cpdag cpdag;
    Dag dag;        // best-scoring consistent extension of cpdag
    double score = 0.0;
    int insert_count = 0;
    int delete_count = 0;
    bool used_pooled_fallback = false;
};

struct ExhaustiveResult {
    Dag dag;
    double score = 0.0;
    long long dags_visited = 0;
};

namespace detail {

// All consistent extensions of a CPDAG, found by orienting each undirected
// edge both ways and keeping orientations that reproduce the CPDAG. The
// count is exponential in the undirected-edge count, so callers cap it.
inline std::vector<Dag> consistent_extensions(const Cpdag& g, std::size_t max_undirected = 12) {
    std::vector<std::pair<int, int>> und;
    const int n = static_cast<int>(g.size());
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b)
            if (g.has_undirected(a, b)) und.emplace_back(a, b);
    std::vector<Dag> out;
    if (und.size() > max_undirected) {
        out.push_back(pdag_to_dag(g));
        return out;
    }
    const std::size_t total = std::size_t{1} << und.size();
    for (std::size_t mask = 0; mask < total; ++mask) {
        Dag dag(g.nodes);
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                if (g.has_directed(a, b)) dag.add_edge(a, b);
        for (std::size_t e = 0; e < und.size(); ++e) {
            const auto [a, b] = und[e];
            if (mask & (std::size_t{1} << e))
                dag.add_edge(a, b);
            else
                dag.add_edge(b, a);
        }
        if (!is_acyclic(dag)) continue;
        if (dag_to_cpdag(dag) == g) out.push_back(std::move(dag));
    }
    return out;
}

inline Dag best_extension(const Cpdag& g, const CgScorer& scorer, double* best_score) {
    const auto extensions = consistent_extensions(g);
    const Dag* best = nullptr;
    double top = 0.0;
    std::string top_edges;
    for (const auto& dag : extensions) {
        const double s = scorer.dag_score(dag);
        if (best == nullptr || s > top + 1e-9 ||
            (s > top - 1e-9 && to_edge_list(dag) < top_edges)) {
            best = &dag;
            top = s;
            top_edges = to_edge_list(dag);
        }
    }
    *best_score = top;
    return *best;
}

}  // namespace detail

// Two-phase greedy equivalence search over the dataset's columns. The forward
// phase adds the best-improving Insert until none improves; the backward
// phase removes the best-improving Delete until none improves. Candidate
// operators are enumerated in a fixed order, so exact ties resolve to the
// lexicographically first candidate and the search is deterministic.
inline FgsResult fgs_search(const MixedDataset& data, ScoreConfig config = {}) {
    if (data.names.size() < 2) throw ValidationError("search needs at least 2 columns");
    if (!data.columns.empty() && data.columns.front().size() < 10)
        throw ValidationError("search needs at least 10 rows");
    const CgScorer scorer(data, config);
    const int n = static_cast<int>(data.names.size());
    Cpdag g(data.names);
    FgsResult result{g, Dag(data.names), 0.0, 0, 0};
    constexpr double kMinGain = 1e-10;

    // Forward phase.
    for (;;) {
        double best_gain = kMinGain;
        int best_x = -1, best_y = -1;
        std::vector<int> best_t;
        for (int x = 0; x < n; ++x) {
            for (int y = 0; y < n; ++y) {
                if (x == y || g.adjacent(x, y)) continue;
                const std::set<int> na = detail::na_set(g, y, x);
                std::vector<int> pool;
                for (int v : g.neighbors_undirected(y))
                    if (!g.adjacent(v, x) && v != x) pool.push_back(v);
                const auto parents = g.parent_set(y);
                for (const auto& t : detail::ordered_subsets(pool)) {
                    std::set<int> na_t = na;
                    na_t.insert(t.begin(), t.end());
                    if (!detail::is_clique(g, na_t)) continue;
                    if (!detail::all_semi_directed_paths_blocked(g, y, x, na_t)) continue;
                    std::set<int> cond = na_t;
                    cond.insert(parents.begin(), parents.end());
                    const std::vector<int> without(cond.begin(), cond.end());
                    std::vector<int> with = without;
                    with.push_back(x);
                    const double gain =
                        scorer.local_score(y, with) - scorer.local_score(y, without);
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_x = x;
                        best_y = y;
                        best_t = t;
                    }
                }
            }
        }
        if (best_x < 0) break;
        g.set_directed(best_x, best_y);
        for (int t : best_t) g.set_directed(t, best_y);
        g = detail::rebuild_cpdag(g);
        ++result.insert_count;
    }

    // Backward phase.
    for (;;) {
        double best_gain = kMinGain;
        int best_x = -1, best_y = -1;
        std::vector<int> best_h;
        for (int x = 0; x < n; ++x) {
            for (int y = 0; y < n; ++y) {
                if (x == y) continue;
                if (!g.has_directed(x, y) && !g.has_undirected(x, y)) continue;
                const std::set<int> na = detail::na_set(g, y, x);
                const auto parents = g.parent_set(y);
                for (const auto& h :
                     detail::ordered_subsets(std::vector<int>(na.begin(), na.end()))) {
                    std::set<int> remaining = na;
                    for (int v : h) remaining.erase(v);
                    if (!detail::is_clique(g, remaining)) continue;
                    std::set<int> cond = remaining;
                    cond.insert(parents.begin(), parents.end());
                    cond.erase(x);
                    const std::vector<int> without(cond.begin(), cond.end());
                    std::vector<int> with = without;
                    with.push_back(x);
                    const double gain =
                        scorer.local_score(y, without) - scorer.local_score(y, with);
                    if (gain > best_gain) {
                        best_gain = gain;
                        best_x = x;
                        best_y = y;
                        best_h = h;
                    }
                }
            }
        }
        if (best_x < 0) break;
        g.remove_edge(best_x, best_y);
        for (int h : best_h) {
            g.set_directed(best_y, h);
            if (g.has_undirected(best_x, h)) g.set_directed(best_x, h);
        }
        g = detail::rebuild_cpdag(g);
        ++result.delete_count;
    }

    result.cpdag = g;
    result.dag = detail::best_extension(g, scorer, &result.score);
    result.used_pooled_fallback = scorer.used_pooled_fallback();
    return result;
}

inline std::set<std::string> fgs_markov_blanket(const FgsResult& result, const std::string& node) {
    return markov_blanket(result.dag, node);
}

// Scores every DAG over the dataset's columns and returns the best. The edge
// set of each unordered pair takes one of three states, so the enumeration
// touches 3^(p(p-1)/2) candidates and scores the acyclic ones.
inline ExhaustiveResult exhaustive_search(const MixedDataset& data, ScoreConfig config = {}) {
    const int n = static_cast<int>(data.names.size());
    if (n > 5)
        throw TooLargeError("exhaustive search supports at most 5 variables, got " +
                            std::to_string(n));
    const CgScorer scorer(data, config);
    std::vector<std::pair<int, int>> pairs;
    for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) pairs.emplace_back(a, b);

    ExhaustiveResult result{Dag(data.names), 0.0, 0};
    std::string best_edges;
    bool have_best = false;
    std::vector<int> state(pairs.size(), 0);  // 0 none, 1 a->b, 2 b->a
    for (;;) {
        Dag dag(data.names);
        for (std::size_t e = 0; e < pairs.size(); ++e) {
            if (state[e] == 1) dag.add_edge(pairs[e].first, pairs[e].second);
            if (state[e] == 2) dag.add_edge(pairs[e].second, pairs[e].first);
        }
        if (is_acyclic(dag)) {
            ++result.dags_visited;
            const double s = scorer.dag_score(dag);
            if (!have_best || s > result.score + 1e-9 ||
                (s > result.score - 1e-9 && to_edge_list(dag) < best_edges)) {
                have_best = true;
                result.score = s;
                result.dag = dag;
                best_edges = to_edge_list(dag);
            }
        }
        // Advance the base-3 counter.
        std::size_t pos = 0;
        while (pos < state.size() && state[pos] == 2) state[pos++] = 0;
        if (pos == state.size()) break;
        ++state[pos];
    }
    return result;
}

}  // namespace sleepeda
