#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <deque>
#include <set>
#include <utility>
#include <vector>

#include "agu/common.hpp"
#include "agu/sparse.hpp"

namespace agu {

using Edge = std::pair<int, int>;  // canonical: first < second
using NodeSet = std::set<int>;

inline Edge canonical_edge(int u, int v) { return u < v ? Edge{u, v} : Edge{v, u}; }

// Undirected graph with node features, labels and train/test masks. Immutable
// after construction; unlearning edits produce new Graph values so parameter
// shapes and node indices stay stable across an unlearning call.
struct Graph {
    int n = 0;           // node count (index space, including isolated placeholders)
    int d = 0;           // feature dimension
    int num_classes = 0;
    std::vector<double> X;       // n x d, row-major
    std::vector<int> y;          // labels in [0, num_classes)
    std::vector<bool> train_mask, test_mask;
    std::vector<std::vector<int>> adj;    // sorted neighbor lists, no self-loops
    std::vector<Edge> edges;              // canonical, sorted

    static Graph build(int n, int d, int num_classes, std::vector<double> X,
                       std::vector<int> y, std::vector<Edge> edge_list,
                       std::vector<bool> train_mask = {}, std::vector<bool> test_mask = {}) {
        Graph g;
        g.n = n;
        g.d = d;
        g.num_classes = num_classes;
        if (X.size() != static_cast<std::size_t>(n) * d)
            throw DimensionError("graph: feature matrix size mismatch");
        if (y.size() != static_cast<std::size_t>(n))
            throw DimensionError("graph: label vector size mismatch");
        for (int label : y)
            if (label < 0 || label >= num_classes) throw DomainError("graph: label out of range");
        g.X = std::move(X);
        g.y = std::move(y);
        g.train_mask = train_mask.empty() ? std::vector<bool>(n, false) : std::move(train_mask);
        g.test_mask = test_mask.empty() ? std::vector<bool>(n, false) : std::move(test_mask);
        if (g.train_mask.size() != static_cast<std::size_t>(n) ||
            g.test_mask.size() != static_cast<std::size_t>(n))
            throw DimensionError("graph: mask size mismatch");
        for (int i = 0; i < n; ++i)
            if (g.train_mask[i] && g.test_mask[i]) throw ContractError("graph: masks overlap");
        for (auto& [u, v] : edge_list) {
            if (u > v) std::swap(u, v);
            if (u < 0 || v >= n) throw ReferenceError("graph: edge endpoint out of range");
            if (u == v) throw ContractError("graph: self-loop not allowed");
        }
        std::sort(edge_list.begin(), edge_list.end());
        if (std::adjacent_find(edge_list.begin(), edge_list.end()) != edge_list.end())
            throw ContractError("graph: duplicate edge");
        g.edges = std::move(edge_list);
        g.adj.assign(static_cast<std::size_t>(n), {});
        for (const auto& [u, v] : g.edges) {
            g.adj[u].push_back(v);
            g.adj[v].push_back(u);
        }
        for (auto& nb : g.adj) std::sort(nb.begin(), nb.end());
        return g;
    }

    bool has_edge(int u, int v) const {
        const auto& nb = adj[u];
        return std::binary_search(nb.begin(), nb.end(), v);
    }

    Graph with_edges(std::vector<Edge> new_edges) const {
        return build(n, d, num_classes, X, y, std::move(new_edges), train_mask, test_mask);
    }

    Graph without_edges() const { return with_edges({}); }

    // Symmetric adjacency as CSR with unit weights.
    SparseMatrix adjacency() const {
        std::vector<std::pair<std::pair<int, int>, double>> trip;
        trip.reserve(edges.size() * 2);
        for (const auto& [u, v] : edges) {
            trip.push_back({{u, v}, 1.0});
            trip.push_back({{v, u}, 1.0});
        }
        return SparseMatrix::from_triplets(n, n, std::move(trip));
    }
};

inline std::vector<int> degrees(const Graph& g) {
    std::vector<int> d(static_cast<std::size_t>(g.n));
    for (int i = 0; i < g.n; ++i) d[i] = static_cast<int>(g.adj[i].size());
    return d;
}

// D^{-1/2} (A [+ I]) D^{-1/2}; rows of isolated nodes are zero (or the lone
// diagonal 1 when self-loops are added).
inline SparseMatrix normalized_adjacency(const Graph& g, bool self_loops) {
    std::vector<double> deg(static_cast<std::size_t>(g.n));
    for (int i = 0; i < g.n; ++i)
        deg[i] = static_cast<double>(g.adj[i].size()) + (self_loops ? 1.0 : 0.0);
    std::vector<double> inv_sqrt(static_cast<std::size_t>(g.n), 0.0);
    for (int i = 0; i < g.n; ++i)
        if (deg[i] > 0.0) inv_sqrt[i] = 1.0 / std::sqrt(deg[i]);
    std::vector<std::pair<std::pair<int, int>, double>> trip;
    for (const auto& [u, v] : g.edges) {
        const double w = inv_sqrt[u] * inv_sqrt[v];
        trip.push_back({{u, v}, w});
        trip.push_back({{v, u}, w});
    }
    if (self_loops)
        for (int i = 0; i < g.n; ++i) trip.push_back({{i, i}, inv_sqrt[i] * inv_sqrt[i]});
    return SparseMatrix::from_triplets(g.n, g.n, std::move(trip));
}

// Row-normalized adjacency D^{-1} A (mean aggregator); zero rows for isolated nodes.
inline SparseMatrix mean_adjacency(const Graph& g) {
    std::vector<std::pair<std::pair<int, int>, double>> trip;
    for (int i = 0; i < g.n; ++i) {
        if (g.adj[i].empty()) continue;
        const double w = 1.0 / static_cast<double>(g.adj[i].size());
        for (int j : g.adj[i]) trip.push_back({{i, j}, w});
    }
    return SparseMatrix::from_triplets(g.n, g.n, std::move(trip));
}

// Adjacency plus self-loops with unit weights (GAT attention mask, GIN sum).
inline SparseMatrix adjacency_with_self(const Graph& g) {
    std::vector<std::pair<std::pair<int, int>, double>> trip;
    for (const auto& [u, v] : g.edges) {
        trip.push_back({{u, v}, 1.0});
        trip.push_back({{v, u}, 1.0});
    }
    for (int i = 0; i < g.n; ++i) trip.push_back({{i, i}, 1.0});
    return SparseMatrix::from_triplets(g.n, g.n, std::move(trip));
}

// BFS hop distances from a seed set; -1 where unreachable.
inline std::vector<int> hop_distances(const Graph& g, const NodeSet& seeds) {
    std::vector<int> dist(static_cast<std::size_t>(g.n), -1);
    std::deque<int> queue;
    for (int s : seeds) {
        dist[s] = 0;
        queue.push_back(s);
    }
    while (!queue.empty()) {
        const int u = queue.front();
        queue.pop_front();
        for (int v : g.adj[u])
            if (dist[v] < 0) {
                dist[v] = dist[u] + 1;
                queue.push_back(v);
            }
    }
    return dist;
}

// Ball of radius k around v, excluding v itself.
inline NodeSet k_hop_set(const Graph& g, int v, int k) {
    if (k < 1) throw ContractError("k_hop_set: k must be >= 1");
    if (v < 0 || v >= g.n) throw ReferenceError("k_hop_set: node out of range");
    std::vector<int> dist = hop_distances(g, {v});
    NodeSet out;
    for (int i = 0; i < g.n; ++i)
        if (i != v && dist[i] >= 1 && dist[i] <= k) out.insert(i);
    return out;
}

// Candidate comparison pool for a deleted edge (u, v): common k-hop neighbors,
// widened to the union when fewer than two nodes remain. Never contains u or v.
// An empty result signals two isolated endpoints; the caller falls back to
// random node pairs.
inline NodeSet candidate_pairs(const Graph& g, int u, int v, int k) {
    if (u == v) throw ContractError("candidate_pairs: endpoints must differ");
    NodeSet bu = k_hop_set(g, u, k);
    NodeSet bv = k_hop_set(g, v, k);
    bu.erase(v);
    bv.erase(u);
    NodeSet inter;
    std::set_intersection(bu.begin(), bu.end(), bv.begin(), bv.end(),
                          std::inserter(inter, inter.begin()));
    if (inter.size() >= 2) return inter;
    NodeSet uni;
    std::set_union(bu.begin(), bu.end(), bv.begin(), bv.end(),
                   std::inserter(uni, uni.begin()));
    return uni;
}

// ---------------------------------------------------------------------------
// Unlearning requests
// ---------------------------------------------------------------------------

enum class RequestKind { Node, Edge, Feature };

struct UnlearnRequest {
    RequestKind kind = RequestKind::Node;
    NodeSet node_ids;            // Node / Feature kinds
    std::vector<Edge> edge_list;  // Edge kind, canonical

    void validate(const Graph& g) const {
        switch (kind) {
            case RequestKind::Node:
            case RequestKind::Feature:
                if (node_ids.empty()) throw ContractError("request: empty node set");
                for (int v : node_ids)
                    if (v < 0 || v >= g.n) throw ReferenceError("request: unknown node");
                break;
            case RequestKind::Edge:
                if (edge_list.empty()) throw ContractError("request: empty edge set");
                // Endpoint range only: re-applying a request to the remaining
                // graph must stay a no-op, so absent edges are not an error here.
                for (const auto& [u, v] : edge_list) {
                    if (u < 0 || u >= g.n || v < 0 || v >= g.n)
                        throw ReferenceError("request: edge endpoint out of range");
                    if (u == v) throw ContractError("request: self-loop edge");
                }
                break;
        }
    }
};

struct GraphDelta {
    Graph remaining;
    std::vector<Edge> removed_edges;
    NodeSet removed_nodes;
    NodeSet zeroed_feature_rows;

    // Nodes the request deletes outright; these are excluded from every
    // affected-neighbor set.
    NodeSet excluded_nodes(const UnlearnRequest& r) const {
        if (r.kind == RequestKind::Feature) return r.node_ids;
        return removed_nodes;
    }
};

// Node deletion keeps index placeholders (isolated, zero features) so model
// parameter shapes and node identities never change across an unlearning call.
inline GraphDelta apply_request(const Graph& g, const UnlearnRequest& r) {
    r.validate(g);
    GraphDelta delta;
    switch (r.kind) {
        case RequestKind::Node: {
            delta.removed_nodes = r.node_ids;
            std::vector<Edge> kept;
            for (const auto& e : g.edges) {
                if (r.node_ids.count(e.first) || r.node_ids.count(e.second))
                    delta.removed_edges.push_back(e);
                else
                    kept.push_back(e);
            }
            delta.zeroed_feature_rows = r.node_ids;
            Graph remaining = g.with_edges(std::move(kept));
            for (int v : r.node_ids)
                for (int j = 0; j < g.d; ++j)
                    remaining.X[static_cast<std::size_t>(v) * g.d + j] = 0.0;
            delta.remaining = std::move(remaining);
            break;
        }
        case RequestKind::Edge: {
            std::set<Edge> doomed(r.edge_list.begin(), r.edge_list.end());
            std::vector<Edge> kept;
            for (const auto& e : g.edges) {
                if (doomed.count(e))
                    delta.removed_edges.push_back(e);
                else
                    kept.push_back(e);
            }
            delta.remaining = g.with_edges(std::move(kept));
            break;
        }
        case RequestKind::Feature: {
            delta.zeroed_feature_rows = r.node_ids;
            Graph remaining = g;
            for (int v : r.node_ids)
                for (int j = 0; j < g.d; ++j)
                    remaining.X[static_cast<std::size_t>(v) * g.d + j] = 0.0;
            delta.remaining = std::move(remaining);
            break;
        }
    }
    return delta;
}

}  // namespace agu
