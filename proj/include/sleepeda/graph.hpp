#pragma once

#include <algorithm>
#include <set>
#include <string>
#include <vector>

#include "sleepeda/errors.hpp"

namespace sleepeda {

// Directed acyclic graph over named nodes.
struct Dag {
    std::vector<std::string> nodes;
    std::vector<std::set<int>> parents;  // parents[child] = set of parent indices

    explicit Dag(std::vector<std::string> names = {})
        : nodes(std::move(names)), parents(nodes.size()) {}

    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i] == name) return static_cast<int>(i);
        throw NameError("unknown node '" + name + "'");
    }

    bool has_edge(int from, int to) const { return parents[static_cast<std::size_t>(to)].count(from) > 0; }

    void add_edge(int from, int to) { parents[static_cast<std::size_t>(to)].insert(from); }

    std::size_t edge_count() const {
        std::size_t total = 0;
        for (const auto& p : parents) total += p.size();
        return total;
    }
};

inline bool is_acyclic(const Dag& g) {
    const std::size_t n = g.nodes.size();
    std::vector<int> indegree(n, 0);
    for (std::size_t c = 0; c < n; ++c) indegree[c] = static_cast<int>(g.parents[c].size());
    std::vector<int> queue;
    for (std::size_t i = 0; i < n; ++i)
        if (indegree[i] == 0) queue.push_back(static_cast<int>(i));
    std::size_t seen = 0;
    while (!queue.empty()) {
        const int v = queue.back();
        queue.pop_back();
        ++seen;
        for (std::size_t c = 0; c < n; ++c) {
            if (g.parents[c].count(v)) {
                if (--indegree[c] == 0) queue.push_back(static_cast<int>(c));
            }
        }
    }
    return seen == n;
}

// Parents, children, and co-parents of the node's children.
inline std::set<std::string> markov_blanket(const Dag& g, const std::string& node) {
    const int v = g.index_of(node);
    std::set<int> blanket = g.parents[static_cast<std::size_t>(v)];
    for (std::size_t c = 0; c < g.nodes.size(); ++c) {
        if (g.parents[c].count(v)) {
            blanket.insert(static_cast<int>(c));
            for (int coparent : g.parents[c]) blanket.insert(coparent);
        }
    }
    blanket.erase(v);
    std::set<std::string> names;
    for (int i : blanket) names.insert(g.nodes[static_cast<std::size_t>(i)]);
    return names;
}

// Partially directed graph: the shared representation for CPDAGs and the
// intermediate patterns the search manipulates. Edge (i, j) is either
// directed i -> j, directed j -> i, or undirected.
struct Pdag {
    std::vector<std::string> nodes;
    std::vector<std::vector<unsigned char>> directed;    // directed[i][j]: i -> j
    std::vector<std::vector<unsigned char>> undirected;  // symmetric

    explicit Pdag(std::vector<std::string> names = {})
        : nodes(std::move(names)),
          directed(nodes.size(), std::vector<unsigned char>(nodes.size(), 0)),
          undirected(nodes.size(), std::vector<unsigned char>(nodes.size(), 0)) {}

    std::size_t size() const { return nodes.size(); }

    int index_of(const std::string& name) const {
        for (std::size_t i = 0; i < nodes.size(); ++i)
            if (nodes[i] == name) return static_cast<int>(i);
        throw NameError("unknown node '" + name + "'");
    }

    bool adjacent(int a, int b) const {
        return directed[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] ||
               directed[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] ||
               undirected[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)];
    }
    bool has_directed(int a, int b) const {
        return directed[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] != 0;
    }
    bool has_undirected(int a, int b) const {
        return undirected[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] != 0;
    }
    void set_directed(int a, int b) {
        directed[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = 1;
        directed[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = 0;
        undirected[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = 0;
        undirected[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = 0;
    }
    void set_undirected(int a, int b) {
        directed[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = 0;
        directed[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = 0;
        undirected[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = 1;
        undirected[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = 1;
    }
    void remove_edge(int a, int b) {
        directed[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = 0;
        directed[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = 0;
        undirected[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] = 0;
        undirected[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] = 0;
    }

    std::vector<int> neighbors_undirected(int v) const {
        std::vector<int> out;
        for (std::size_t j = 0; j < size(); ++j)
            if (undirected[static_cast<std::size_t>(v)][j]) out.push_back(static_cast<int>(j));
        return out;
    }
    std::vector<int> adjacents(int v) const {
        std::vector<int> out;
        for (std::size_t j = 0; j < size(); ++j)
            if (adjacent(v, static_cast<int>(j))) out.push_back(static_cast<int>(j));
        return out;
    }
    std::set<int> parent_set(int v) const {
        std::set<int> out;
        for (std::size_t j = 0; j < size(); ++j)
            if (directed[j][static_cast<std::size_t>(v)]) out.insert(static_cast<int>(j));
        return out;
    }

    bool operator==(const Pdag& other) const {
        return nodes == other.nodes && directed == other.directed &&
               undirected == other.undirected;
    }
};

using Cpdag = Pdag;

// Meek orientation rules R1-R3, applied to closure. R4 only fires under
// background knowledge, which this search does not use.
inline void meek_closure(Pdag& g) {
    const int n = static_cast<int>(g.size());
    bool changed = true;
    while (changed) {
        changed = false;
        for (int a = 0; a < n; ++a) {
            for (int b = 0; b < n; ++b) {
                if (!g.has_undirected(a, b)) continue;
                // R1: c -> a, c not adjacent to b  =>  a -> b.
                for (int c = 0; c < n; ++c) {
                    if (g.has_directed(c, a) && !g.adjacent(c, b)) {
                        g.set_directed(a, b);
                        changed = true;
                        break;
                    }
                }
                if (!g.has_undirected(a, b)) continue;
                // R2: a -> c -> b  =>  a -> b.
                for (int c = 0; c < n; ++c) {
                    if (g.has_directed(a, c) && g.has_directed(c, b)) {
                        g.set_directed(a, b);
                        changed = true;
                        break;
                    }
                }
                if (!g.has_undirected(a, b)) continue;
                // R3: a - c -> b and a - d -> b with c, d non-adjacent  =>  a -> b.
                for (int c = 0; c < n && g.has_undirected(a, b); ++c) {
                    if (!g.has_undirected(a, c) || !g.has_directed(c, b)) continue;
                    for (int d = c + 1; d < n; ++d) {
                        if (g.has_undirected(a, d) && g.has_directed(d, b) && !g.adjacent(c, d)) {
                            g.set_directed(a, b);
                            changed = true;
                            break;
                        }
                    }
                }
            }
        }
    }
}

// CPDAG of a DAG: skeleton plus v-structures, closed under Meek rules.
inline Cpdag dag_to_cpdag(const Dag& dag) {
    if (!is_acyclic(dag)) throw ValidationError("graph has a directed cycle");
    Pdag g(dag.nodes);
    const int n = static_cast<int>(dag.nodes.size());
    for (int c = 0; c < n; ++c)
        for (int p : dag.parents[static_cast<std::size_t>(c)]) g.set_undirected(p, c);
    for (int c = 0; c < n; ++c) {
        const auto& ps = dag.parents[static_cast<std::size_t>(c)];
        for (auto it1 = ps.begin(); it1 != ps.end(); ++it1) {
            for (auto it2 = std::next(it1); it2 != ps.end(); ++it2) {
                const bool adjacent_parents = dag.has_edge(*it1, *it2) || dag.has_edge(*it2, *it1);
                if (!adjacent_parents) {
                    g.set_directed(*it1, c);
                    g.set_directed(*it2, c);
                }
            }
        }
    }
    meek_closure(g);
    return g;
}

// Consistent extension of a PDAG into a DAG (the sink-elimination algorithm).
// Throws ValidationError when none exists.
inline Dag pdag_to_dag(const Pdag& input) {
    Pdag g = input;
    Dag dag(input.nodes);
    const int n = static_cast<int>(input.size());
    for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
            if (g.has_directed(a, b)) dag.add_edge(a, b);

    std::vector<bool> removed(static_cast<std::size_t>(n), false);
    int remaining = n;
    while (remaining > 0) {
        int chosen = -1;
        for (int x = 0; x < n && chosen < 0; ++x) {
            if (removed[static_cast<std::size_t>(x)]) continue;
            // x must be a sink in the directed part.
            bool sink = true;
            for (int j = 0; j < n; ++j)
                if (!removed[static_cast<std::size_t>(j)] && g.has_directed(x, j)) sink = false;
            if (!sink) continue;
            // Every undirected neighbor of x must be adjacent to all of x's
            // other adjacents.
            bool ok = true;
            for (int y : g.neighbors_undirected(x)) {
                if (removed[static_cast<std::size_t>(y)]) continue;
                for (int z : g.adjacents(x)) {
                    if (z == y || removed[static_cast<std::size_t>(z)]) continue;
                    if (!g.adjacent(y, z)) {
                        ok = false;
                        break;
                    }
                }
                if (!ok) break;
            }
            if (ok) chosen = x;
        }
        if (chosen < 0) throw ValidationError("pdag admits no consistent extension");
        for (int y : g.neighbors_undirected(chosen))
            if (!removed[static_cast<std::size_t>(y)]) dag.add_edge(y, chosen);
        for (int j = 0; j < n; ++j)
            if (!removed[static_cast<std::size_t>(j)]) g.remove_edge(chosen, j);
        removed[static_cast<std::size_t>(chosen)] = true;
        --remaining;
    }
    if (!is_acyclic(dag)) throw ValidationError("pdag extension produced a cycle");
    return dag;
}

// Edge-list text format: one edge per line, `A -> B` or `A -- B`.
inline std::string to_edge_list(const Pdag& g) {
    std::vector<std::string> lines;
    const int n = static_cast<int>(g.size());
    for (int a = 0; a < n; ++a) {
        for (int b = 0; b < n; ++b) {
            if (g.has_directed(a, b))
                lines.push_back(g.nodes[static_cast<std::size_t>(a)] + " -> " +
                                g.nodes[static_cast<std::size_t>(b)]);
            if (a < b && g.has_undirected(a, b)) {
                const auto& lo = std::min(g.nodes[static_cast<std::size_t>(a)],
                                          g.nodes[static_cast<std::size_t>(b)]);
                const auto& hi = std::max(g.nodes[static_cast<std::size_t>(a)],
                                          g.nodes[static_cast<std::size_t>(b)]);
                lines.push_back(lo + " -- " + hi);
            }
        }
    }
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
}

inline std::string to_edge_list(const Dag& g) {
    std::vector<std::string> lines;
    for (std::size_t c = 0; c < g.nodes.size(); ++c)
        for (int p : g.parents[c])
            lines.push_back(g.nodes[static_cast<std::size_t>(p)] + " -> " + g.nodes[c]);
    std::sort(lines.begin(), lines.end());
    std::string out;
    for (const auto& l : lines) out += l + "\n";
    return out;
}

}  // namespace sleepeda
