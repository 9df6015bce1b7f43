#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "agu/common.hpp"
#include "agu/graph.hpp"
#include "agu/models.hpp"
#include "agu/neighbors.hpp"
#include "agu/tensor.hpp"

namespace agu {

struct UnlearnConfig {
    double alpha = 0.1;    // weight of the edge term inside node unlearning
    int epochs = 25;
    double lr = 0.01;
    double kl_cap = 10.0;  // cap on divergence-maximizing terms
    int random_pair_count = 0;  // 0 -> match the deleted edge count
    std::uint64_t seed = 0;
    FilterConfig filter;

    void validate() const {
        if (alpha < 0.0) throw ContractError("unlearn config: alpha must be >= 0");
        if (epochs < 1 || epochs > 1000) throw ContractError("unlearn config: epochs out of range");
        if (lr <= 0.0) throw ContractError("unlearn config: lr must be positive");
        filter.validate();
    }
};

enum class UnlearnMethod { Agu, ReverseCe, DecBaseline };

struct UnlearnOutcome {
    Model model;
    std::vector<double> loss_ef_trace;
    std::vector<double> loss_an_trace;
    double wall_time_ms = 0.0;
    NeighborReport report;
};

namespace detail {
inline Tensor row_mean(const Tensor& t) {
    const int m = t.rows();
    if (m == 0) throw ContractError("row_mean of empty tensor");
    return matmul(Tensor::from(1, m, std::vector<double>(static_cast<std::size_t>(m),
                                                         1.0 / static_cast<double>(m))),
                  t);
}

inline std::vector<int> firsts(const std::vector<Edge>& pairs) {
    std::vector<int> out;
    out.reserve(pairs.size());
    for (const auto& [u, v] : pairs) out.push_back(u);
    return out;
}

inline std::vector<int> seconds(const std::vector<Edge>& pairs) {
    std::vector<int> out;
    out.reserve(pairs.size());
    for (const auto& [u, v] : pairs) out.push_back(v);
    return out;
}
}  // namespace detail

// dis({phi(h_u, h_v)}, {phi(h_p, h_q)}) with phi = column concatenation and
// dis = MSE between the mean-pooled set representations. The deleted-edge side
// reads the unlearned model's embeddings; the comparison side is frozen.
inline Tensor edge_consistency_loss(const Tensor& f_hat_emb, const Tensor& frozen_emb,
                                    const std::vector<Edge>& deleted_edges,
                                    const std::vector<Edge>& comparison_pairs) {
    if (deleted_edges.empty()) throw ContractError("edge consistency loss: empty edge set");
    if (comparison_pairs.size() != deleted_edges.size())
        throw ContractError("edge consistency loss: comparison set size must match");
    Tensor del = concat_cols(gather_rows(f_hat_emb, detail::firsts(deleted_edges)),
                             gather_rows(f_hat_emb, detail::seconds(deleted_edges)));
    Tensor cmp = concat_cols(gather_rows(frozen_emb, detail::firsts(comparison_pairs)),
                             gather_rows(frozen_emb, detail::seconds(comparison_pairs)));
    return mse(detail::row_mean(del), detail::row_mean(cmp));
}

inline std::vector<Edge> random_node_pairs(int n, std::size_t count, std::mt19937_64& rng) {
    std::uniform_int_distribution<int> pick(0, n - 1);
    std::vector<Edge> pairs;
    pairs.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const int p = pick(rng);
        const int q = pick(rng);
        pairs.push_back({p, q});
    }
    return pairs;
}

// Homophily-preserving comparison pairs: for each deleted edge, two nodes
// drawn with replacement from its candidate pool; edges whose pool is empty
// (both endpoints isolated) fall back to a random node pair.
inline std::vector<Edge> homophily_comparison_pairs(const Graph& g,
                                                    const std::vector<Edge>& deleted_edges,
                                                    int k, std::mt19937_64& rng) {
    std::vector<Edge> pairs;
    pairs.reserve(deleted_edges.size());
    for (const auto& [u, v] : deleted_edges) {
        const NodeSet pool = candidate_pairs(g, u, v, k);
        if (pool.empty()) {
            pairs.push_back(random_node_pairs(g.n, 1, rng)[0]);
            continue;
        }
        std::vector<int> flat(pool.begin(), pool.end());
        std::uniform_int_distribution<std::size_t> pick(0, flat.size() - 1);
        const int p = flat[pick(rng)];
        const int q = flat[pick(rng)];
        pairs.push_back({p, q});
    }
    return pairs;
}

inline Tensor loss_dec_baseline(const Tensor& f_hat_emb, const Tensor& frozen_emb, int n,
                                const std::vector<Edge>& deleted_edges, std::size_t pair_count,
                                std::mt19937_64& rng) {
    if (deleted_edges.empty()) throw ContractError("deleted edge consistency: empty edge set");
    if (pair_count == 0) pair_count = deleted_edges.size();
    if (pair_count != deleted_edges.size())
        throw ContractError("deleted edge consistency: pair count must equal edge count");
    return edge_consistency_loss(f_hat_emb, frozen_emb, deleted_edges,
                                 random_node_pairs(n, pair_count, rng));
}

inline Tensor loss_eu(const Tensor& f_hat_emb, const Tensor& frozen_emb, const Graph& g,
                      const std::vector<Edge>& deleted_edges, int k, std::mt19937_64& rng) {
    if (deleted_edges.empty()) throw ContractError("edge unlearning loss: empty edge set");
    return edge_consistency_loss(f_hat_emb, frozen_emb, deleted_edges,
                                 homophily_comparison_pairs(g, deleted_edges, k, rng));
}

// Label distribution of the frozen model on the edgeless graph; depends only
// on node features.
inline Tensor edge_free_distribution(const Model& f_g, const Graph& g) {
    const Graph lone = g.without_edges();
    return row_softmax(forward(f_g, lone).logits.detach()).detach();
}

// L_FU = -mean over nodes of min(KL(y'_u, yhat_u), cap); minimizing pushes the
// unlearned model's distribution away from the feature-only one, and the cap
// keeps the ascent bounded.
inline Tensor loss_fu(const Tensor& f_hat_logits, const Tensor& y_prime, const NodeSet& nodes,
                      double kl_cap) {
    if (nodes.empty()) throw ContractError("feature unlearning loss: empty node set");
    Tensor y_hat = row_softmax(f_hat_logits);
    Tensor acc = Tensor::zeros(1, 1);
    for (int u : nodes)
        acc = add(acc, min_const(kl_divergence(y_prime, y_hat, {u}), kl_cap));
    return scale(acc, -1.0 / static_cast<double>(nodes.size()));
}

inline Tensor loss_an(const Tensor& f_hat_logits, const std::vector<int>& pseudo_labels,
                      const NodeSet& n_han) {
    if (n_han.empty()) return Tensor::zeros(1, 1);
    return cross_entropy(f_hat_logits, pseudo_labels, {n_han.begin(), n_han.end()});
}

// Reverse cross-entropy ascent on the frozen model's predictions, capped per
// node for stability.
inline Tensor reverse_ce_baseline(const Tensor& f_hat_logits,
                                  const std::vector<int>& pseudo_labels, const NodeSet& nodes,
                                  double cap) {
    if (nodes.empty()) throw ContractError("reverse cross-entropy: empty node set");
    Tensor acc = Tensor::zeros(1, 1);
    for (int u : nodes)
        acc = add(acc, min_const(cross_entropy(f_hat_logits, pseudo_labels, {u}), cap));
    return scale(acc, -1.0 / static_cast<double>(nodes.size()));
}

// ---------------------------------------------------------------------------
// Orchestration
// ---------------------------------------------------------------------------

inline UnlearnOutcome unlearn(const Model& f_g, const Graph& g, const UnlearnRequest& request,
                              const UnlearnConfig& cfg,
                              UnlearnMethod method = UnlearnMethod::Agu) {
    cfg.validate();
    request.validate(g);
    const auto t0 = std::chrono::steady_clock::now();

    GraphDelta delta = apply_request(g, request);
    UnlearnOutcome outcome;
    outcome.report = build_neighbor_report(f_g, g, delta, request, cfg.filter);

    // Frozen references, computed once before epoch 0.
    Model frozen = clone_model(f_g);
    frozen.deterministic = true;
    const ForwardResult frozen_fr = forward(frozen, g);
    const Tensor frozen_emb = frozen_fr.embedding.detach();
    std::vector<int> pseudo_labels(static_cast<std::size_t>(g.n));
    for (int i = 0; i < g.n; ++i) {
        int best = 0;
        for (int j = 1; j < frozen_fr.logits.cols(); ++j)
            if (frozen_fr.logits.at(i, j) > frozen_fr.logits.at(i, best)) best = j;
        pseudo_labels[i] = best;
    }
    const bool needs_y_prime = request.kind != RequestKind::Edge;
    Tensor y_prime = needs_y_prime ? edge_free_distribution(frozen, g) : Tensor();

    // The edge side of node unlearning: edges incident to the deleted nodes.
    std::vector<Edge> target_edges;
    NodeSet target_feature_rows;
    switch (request.kind) {
        case RequestKind::Edge:
            target_edges = request.edge_list;
            break;
        case RequestKind::Node:
            target_edges = delta.removed_edges;
            target_feature_rows = request.node_ids;
            break;
        case RequestKind::Feature:
            target_feature_rows = request.node_ids;
            break;
    }
    NodeSet ascent_nodes = delta_seed_nodes(request);  // for the reverse-CE baseline

    Model f_hat = clone_model(f_g);
    f_hat.deterministic = true;
    AdamConfig opt{cfg.lr, 0.9, 0.999, 1e-8, 0.0};
    std::vector<AdamState> states(f_hat.params.size());

    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (auto& p : f_hat.params) p.tensor.zero_grad();
        ForwardResult fr = forward(f_hat, delta.remaining);
        std::mt19937_64 pair_rng(derive_seed(cfg.seed, "pairs", static_cast<std::uint64_t>(epoch)));

        Tensor l_ef = Tensor::zeros(1, 1);
        const char* ef_name = "L_EF";
        switch (method) {
            case UnlearnMethod::Agu:
                switch (request.kind) {
                    case RequestKind::Edge:
                        ef_name = "L_EU";
                        l_ef = loss_eu(fr.embedding, frozen_emb, g, target_edges, f_g.layers,
                                       pair_rng);
                        break;
                    case RequestKind::Feature:
                        ef_name = "L_FU";
                        l_ef = loss_fu(fr.logits, y_prime, target_feature_rows, cfg.kl_cap);
                        break;
                    case RequestKind::Node: {
                        ef_name = "L_NU";
                        Tensor fu = loss_fu(fr.logits, y_prime, target_feature_rows, cfg.kl_cap);
                        if (!target_edges.empty() && cfg.alpha > 0.0) {
                            Tensor eu = loss_eu(fr.embedding, frozen_emb, g, target_edges,
                                                f_g.layers, pair_rng);
                            l_ef = add(scale(eu, cfg.alpha), fu);
                        } else {
                            l_ef = fu;
                        }
                        break;
                    }
                }
                break;
            case UnlearnMethod::ReverseCe:
                ef_name = "L_RCE";
                l_ef = reverse_ce_baseline(fr.logits, pseudo_labels, ascent_nodes, cfg.kl_cap);
                break;
            case UnlearnMethod::DecBaseline: {
                ef_name = "L_DEC";
                std::vector<Edge> edges = target_edges.empty()
                                              ? std::vector<Edge>{}
                                              : target_edges;
                if (edges.empty()) {
                    l_ef = loss_fu(fr.logits, y_prime, target_feature_rows, cfg.kl_cap);
                } else {
                    const std::size_t count =
                        cfg.random_pair_count > 0 ? static_cast<std::size_t>(cfg.random_pair_count)
                                                  : edges.size();
                    l_ef = loss_dec_baseline(fr.embedding, frozen_emb, g.n, edges, count,
                                             pair_rng);
                }
                break;
            }
        }
        Tensor l_an = loss_an(fr.logits, pseudo_labels, outcome.report.n_han);
        Tensor total = add(l_ef, l_an);
        if (!std::isfinite(total.item()))
            throw TrainingFailure(std::string("unlearning diverged in term ") +
                                  (!std::isfinite(l_ef.item()) ? ef_name : "L_AN"));
        backward(total);
        for (std::size_t i = 0; i < f_hat.params.size(); ++i)
            adam_step(f_hat.params[i].tensor, states[i], opt);
        outcome.loss_ef_trace.push_back(l_ef.item());
        outcome.loss_an_trace.push_back(l_an.item());
    }
    outcome.model = std::move(f_hat);
    outcome.wall_time_ms = std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - t0)
                               .count();
    return outcome;
}

}  // namespace agu
