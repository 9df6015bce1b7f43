#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <vector>

#include "agu/common.hpp"
#include "agu/graph.hpp"
#include "agu/models.hpp"
#include "agu/tensor.hpp"

namespace agu {

struct FilterConfig {
    double theta = 1e-4;          // marginal-neighbor threshold
    double k_ans_fraction = 0.4;  // share of the pool kept as highly affected
    std::uint64_t probe_seed = 0;
    double probe_tolerance = 1e-9;
    double propagation_tolerance = 1e-9;

    void validate() const {
        if (theta < 0.0) throw ContractError("filter config: theta must be >= 0");
        if (!(k_ans_fraction > 0.0) || k_ans_fraction > 1.0)
            throw ContractError("filter config: k_ans fraction must be in (0, 1]");
    }
};

// Symmetric normalization D^{-1/2} A D^{-1/2} of a raw adjacency, no
// self-loops; degrees are row sums, zero-degree rows stay zero.
inline SparseMatrix normalize_symmetric(const SparseMatrix& a) {
    if (a.rows != a.cols) throw DimensionError("normalize_symmetric: square matrix required");
    std::vector<double> deg(static_cast<std::size_t>(a.rows), 0.0);
    for (int i = 0; i < a.rows; ++i)
        for (std::size_t e = a.row_offsets[i]; e < a.row_offsets[i + 1]; ++e)
            deg[i] += a.values[e];
    std::vector<double> inv_sqrt(static_cast<std::size_t>(a.rows), 0.0);
    for (int i = 0; i < a.rows; ++i)
        if (deg[i] > 0.0) inv_sqrt[i] = 1.0 / std::sqrt(deg[i]);
    SparseMatrix out = a;
    for (int i = 0; i < a.rows; ++i)
        for (std::size_t e = a.row_offsets[i]; e < a.row_offsets[i + 1]; ++e)
            out.values[e] = a.values[e] * inv_sqrt[i] * inv_sqrt[a.col_indices[e]];
    return out;
}

// k-step propagation change [(norm Â)^k - (norm A)^k] X, built by k successive
// sparse products; matrix powers are never materialized.
inline Tensor propagation_delta(const SparseMatrix& a, const SparseMatrix& a_hat,
                                const Tensor& x, int k) {
    if (a.rows != a_hat.rows || a.cols != a_hat.cols)
        throw DimensionError("propagation_delta: adjacency shapes differ");
    if (k < 1) throw ContractError("propagation_delta: k must be >= 1");
    const SparseMatrix na = normalize_symmetric(a);
    const SparseMatrix na_hat = normalize_symmetric(a_hat);
    Tensor before = x.detach();
    Tensor after = x.detach();
    for (int step = 0; step < k; ++step) {
        before = spmm(na, before);
        after = spmm(na_hat, after);
    }
    return sub(after, before);
}

inline NodeSet affected_by_propagation(const Tensor& delta, const NodeSet& remaining,
                                       double tol = 1e-9) {
    if (tol < 0.0) throw ContractError("affected_by_propagation: tol must be >= 0");
    NodeSet out;
    for (int i : remaining) {
        double linf = 0.0;
        for (int j = 0; j < delta.cols(); ++j) linf = std::max(linf, std::abs(delta.at(i, j)));
        if (linf > tol) out.insert(i);
    }
    return out;
}

struct ProbeResult {
    NodeSet affected;
    bool ambiguous = false;  // the three probe seeds disagreed; union reported
};

namespace detail {
inline NodeSet probe_once(Arch arch, const std::vector<int>& dims, const Graph& g,
                          const Graph& remaining, const NodeSet& exclude,
                          std::uint64_t seed, double tol) {
    Model probe = init_model(arch, dims, seed);
    probe.deterministic = true;
    const Tensor before = forward(probe, g).logits;
    const Tensor after = forward(probe, remaining).logits;
    NodeSet out;
    for (int v = 0; v < g.n; ++v) {
        if (exclude.count(v)) continue;
        double linf = 0.0;
        for (int j = 0; j < before.cols(); ++j)
            linf = std::max(linf, std::abs(before.at(v, j) - after.at(v, j)));
        if (linf > tol) out.insert(v);
    }
    return out;
}
}  // namespace detail

// Architecture-agnostic affected-neighbor identification: run a randomly
// initialized copy of the architecture on the graph before and after deletion
// and keep nodes whose outputs moved. Three probe seeds must agree; on
// disagreement the union is reported with the ambiguity flag set.
inline ProbeResult affected_by_probe(Arch arch, const std::vector<int>& dims, const Graph& g,
                                     const GraphDelta& delta, const NodeSet& exclude,
                                     std::uint64_t seed, double tol = 1e-9) {
    NodeSet inter, uni;
    for (int trial = 0; trial < 3; ++trial) {
        NodeSet s = detail::probe_once(arch, dims, g, delta.remaining, exclude,
                                       derive_seed(seed, "probe", static_cast<std::uint64_t>(trial)),
                                       tol);
        if (trial == 0) {
            inter = s;
            uni = s;
        } else {
            NodeSet tmp;
            std::set_intersection(inter.begin(), inter.end(), s.begin(), s.end(),
                                  std::inserter(tmp, tmp.begin()));
            inter = std::move(tmp);
            uni.insert(s.begin(), s.end());
        }
    }
    return {uni, inter != uni};
}

// Nodes whose deletion drives the filter: the deleted nodes themselves, or the
// endpoints of deleted edges.
inline NodeSet delta_seed_nodes(const UnlearnRequest& req) {
    NodeSet seeds;
    if (req.kind == RequestKind::Edge) {
        for (const auto& [u, v] : req.edge_list) {
            seeds.insert(u);
            seeds.insert(v);
        }
    } else {
        seeds = req.node_ids;
    }
    return seeds;
}

struct MarginalFilterResult {
    NodeSet affected;       // propagation-based affected set
    NodeSet marginal;       // outermost-hop members, degree-change-only influence
    NodeSet kept_marginal;  // marginal neighbors surviving the threshold
    NodeSet keep;           // non-marginal affected plus kept marginal
};

// Marginal-neighbor filtering for degree-based architectures: a marginal
// neighbor survives only if its propagation change exceeds the change caused
// by deleting one random edge inside the k-hop ball of each unlearned node.
inline MarginalFilterResult marginal_filter(const Graph& g, const GraphDelta& delta,
                                            const UnlearnRequest& req, int k, double theta,
                                            std::uint64_t seed, double tol = 1e-9) {
    if (theta < 0.0) throw ContractError("marginal_filter: theta must be >= 0");
    if (req.kind == RequestKind::Feature)
        throw ContractError("marginal_filter: feature requests have no marginal neighbors");
    MarginalFilterResult result;
    const SparseMatrix a = g.adjacency();
    const SparseMatrix a_hat = delta.remaining.adjacency();
    const Tensor x = Tensor::from(g.n, g.d, g.X);
    const Tensor dh = propagation_delta(a, a_hat, x, k);
    NodeSet remaining_nodes;
    const NodeSet excluded = delta.excluded_nodes(req);
    for (int i = 0; i < g.n; ++i)
        if (!excluded.count(i)) remaining_nodes.insert(i);
    result.affected = affected_by_propagation(dh, remaining_nodes, tol);

    const NodeSet seeds = delta_seed_nodes(req);
    const std::vector<int> dist = hop_distances(g, seeds);
    const int outer_hop = req.kind == RequestKind::Node ? k + 1 : k;
    for (int i : result.affected)
        if (dist[i] == outer_hop) result.marginal.insert(i);

    // Build A' on one shared copy: per unlearned node, delete one random edge
    // from its k-hop ball, skipping balls with no deletable edges and edges
    // already in the request.
    std::set<Edge> removed(delta.removed_edges.begin(), delta.removed_edges.end());
    std::set<Edge> alive(g.edges.begin(), g.edges.end());
    std::mt19937_64 rng(seed);
    for (int u : seeds) {
        NodeSet ball = k_hop_set(g, u, k);
        ball.insert(u);
        std::vector<Edge> candidates;
        for (const Edge& e : alive)
            if (ball.count(e.first) && ball.count(e.second) && !removed.count(e))
                candidates.push_back(e);
        if (candidates.empty()) continue;
        std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);
        alive.erase(candidates[pick(rng)]);
    }
    const Graph g_prime = g.with_edges({alive.begin(), alive.end()});
    const Tensor dh_prime = propagation_delta(a, g_prime.adjacency(), x, k);

    auto row_l2 = [](const Tensor& t, int i) {
        double acc = 0.0;
        for (int j = 0; j < t.cols(); ++j) acc += t.at(i, j) * t.at(i, j);
        return std::sqrt(acc);
    };
    for (int i : result.marginal)
        if (row_l2(dh, i) - row_l2(dh_prime, i) > theta) result.kept_marginal.insert(i);
    for (int i : result.affected)
        if (!result.marginal.count(i)) result.keep.insert(i);
    result.keep.insert(result.kept_marginal.begin(), result.kept_marginal.end());
    return result;
}

struct SelectionResult {
    NodeSet selected;
    std::map<int, double> diff_scores;
};

// diff(v) = 1 - cosine similarity of the frozen model's pre-logit embeddings
// on the remaining vs. original graph; the top ceil(fraction * |pool|) nodes
// are kept, ties broken by ascending node id.
inline SelectionResult select_top_affected(const Model& f_g, const Graph& g,
                                           const Graph& remaining, const NodeSet& pool,
                                           double k_ans_fraction) {
    if (pool.empty()) throw ContractError("select_top_affected: empty pool");
    if (!(k_ans_fraction > 0.0) || k_ans_fraction > 1.0)
        throw ContractError("select_top_affected: fraction must be in (0, 1]");
    const Tensor before = forward(f_g, g).embedding;
    const Tensor after = forward(f_g, remaining).embedding;
    SelectionResult result;
    for (int v : pool) {
        bool identical = true;
        for (int j = 0; j < before.cols() && identical; ++j)
            identical = before.at(v, j) == after.at(v, j);
        double diff = 0.0;
        if (!identical) {
            double dot = 0.0, na = 0.0, nb = 0.0;
            for (int j = 0; j < before.cols(); ++j) {
                dot += before.at(v, j) * after.at(v, j);
                na += before.at(v, j) * before.at(v, j);
                nb += after.at(v, j) * after.at(v, j);
            }
            if (na == 0.0 || nb == 0.0)
                diff = 1.0;  // one embedding collapsed to zero
            else
                diff = 1.0 - dot / (std::sqrt(na) * std::sqrt(nb));
        }
        result.diff_scores[v] = diff;
    }
    const std::size_t k_count = static_cast<std::size_t>(
        std::ceil(k_ans_fraction * static_cast<double>(pool.size())));
    std::vector<int> order(pool.begin(), pool.end());
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
        const double da = result.diff_scores[a], db = result.diff_scores[b];
        if (da != db) return da > db;
        return a < b;
    });
    for (std::size_t i = 0; i < std::min(k_count, order.size()); ++i)
        result.selected.insert(order[i]);
    return result;
}

struct NeighborReport {
    NodeSet n_aff;  // propagation-based (degree-based estimate)
    NodeSet n_ac;   // probe-based accurate set
    NodeSet n_fmn;  // marginal neighbors surviving the filter
    NodeSet n_han;  // highly affected neighbors chosen for preservation
    std::map<int, double> diff_scores;
    bool probe_ambiguous = false;
    std::map<int, int> hop_histogram;  // hop distance from the request -> count in n_ac
};

// Full selection pipeline: probe, then (degree-based structural tasks only)
// marginal filtering, then top-k selection over the survivors. Feature
// unlearning leaves the topology unchanged, so the filter is skipped.
inline NeighborReport build_neighbor_report(const Model& f_g, const Graph& g,
                                            const GraphDelta& delta, const UnlearnRequest& req,
                                            const FilterConfig& cfg) {
    cfg.validate();
    NeighborReport report;
    const int k = f_g.layers;
    const NodeSet excluded = delta.excluded_nodes(req);
    NodeSet remaining_nodes;
    for (int i = 0; i < g.n; ++i)
        if (!excluded.count(i)) remaining_nodes.insert(i);

    const Tensor dh = propagation_delta(g.adjacency(), delta.remaining.adjacency(),
                                        Tensor::from(g.n, g.d, g.X), k);
    report.n_aff = affected_by_propagation(dh, remaining_nodes, cfg.propagation_tolerance);

    ProbeResult probe = affected_by_probe(f_g.arch, f_g.dims, g, delta, excluded,
                                          cfg.probe_seed, cfg.probe_tolerance);
    report.n_ac = probe.affected;
    report.probe_ambiguous = probe.ambiguous;

    NodeSet pool = report.n_ac;
    if (degree_based(f_g.arch) && req.kind != RequestKind::Feature) {
        MarginalFilterResult mf = marginal_filter(g, delta, req, k, cfg.theta,
                                                  derive_seed(cfg.probe_seed, "marginal"),
                                                  cfg.propagation_tolerance);
        report.n_fmn = mf.kept_marginal;
        NodeSet filtered;
        for (int v : pool)
            if (!mf.marginal.count(v) || mf.kept_marginal.count(v)) filtered.insert(v);
        pool = std::move(filtered);
    }
    if (!pool.empty()) {
        SelectionResult sel = select_top_affected(f_g, g, delta.remaining, pool,
                                                  cfg.k_ans_fraction);
        report.n_han = std::move(sel.selected);
        report.diff_scores = std::move(sel.diff_scores);
    }
    const std::vector<int> dist = hop_distances(g, delta_seed_nodes(req));
    for (int v : report.n_ac)
        if (dist[v] >= 0) ++report.hop_histogram[dist[v]];
    return report;
}

}  // namespace agu
