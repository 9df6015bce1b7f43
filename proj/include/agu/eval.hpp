#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "agu/common.hpp"
#include "agu/graph.hpp"
#include "agu/models.hpp"
#include "agu/unlearn.hpp"

namespace agu {

// Micro-averaged F1 over the masked rows. For single-label multiclass this
// equals accuracy; both routes are computed and cross-checked.
inline double micro_f1(const std::vector<int>& pred, const std::vector<int>& truth,
                       const std::vector<bool>& mask) {
    if (pred.size() != truth.size() || pred.size() != mask.size())
        throw DimensionError("micro_f1: size mismatch");
    long tp = 0, fp = 0, fn = 0, total = 0, correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        if (!mask[i]) continue;
        ++total;
        if (pred[i] == truth[i]) {
            ++tp;
            ++correct;
        } else {
            ++fp;  // predicted class gains a false positive
            ++fn;  // true class gains a false negative
        }
    }
    if (total == 0) throw ContractError("micro_f1: empty mask");
    const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double recall = static_cast<double>(tp) / static_cast<double>(tp + fn);
    const double f1 = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall)
                                               : 0.0;
    const double accuracy = static_cast<double>(correct) / static_cast<double>(total);
    if (std::abs(f1 - accuracy) > 1e-12)
        throw ContractError("micro_f1: accuracy cross-check failed");
    return f1;
}

// ---------------------------------------------------------------------------
// Synthetic data: planted-partition graphs with noisy one-hot block features.
// ---------------------------------------------------------------------------

struct SbmSpec {
    int n = 60;
    int blocks = 2;
    double p_in = 0.3;
    double p_out = 0.02;
    int d = 8;
    double signal = 5.0;  // weight of the one-hot block indicator
    std::uint64_t seed = 0;
    double train_fraction = 0.8;

    void validate() const {
        if (n < 1 || blocks < 1 || n % blocks != 0)
            throw ContractError("sbm: n must be a positive multiple of blocks");
        if (!(p_in > p_out)) throw ContractError("sbm: p_in must exceed p_out");
        if (p_in < 0.0 || p_in > 1.0 || p_out < 0.0) throw ContractError("sbm: bad probabilities");
        if (d < blocks) throw ContractError("sbm: feature dim must be >= blocks");
    }
};

inline Graph generate_sbm(const SbmSpec& spec) {
    spec.validate();
    std::mt19937_64 rng(derive_seed(spec.seed, "sbm"));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int per_block = spec.n / spec.blocks;
    std::vector<int> labels(static_cast<std::size_t>(spec.n));
    for (int i = 0; i < spec.n; ++i) labels[i] = i / per_block;
    std::vector<Edge> edges;
    for (int i = 0; i < spec.n; ++i)
        for (int j = i + 1; j < spec.n; ++j) {
            const double p = labels[i] == labels[j] ? spec.p_in : spec.p_out;
            if (unit(rng) < p) edges.push_back({i, j});
        }
    std::vector<double> X(static_cast<std::size_t>(spec.n) * spec.d);
    for (int i = 0; i < spec.n; ++i)
        for (int j = 0; j < spec.d; ++j)
            X[static_cast<std::size_t>(i) * spec.d + j] =
                unit(rng) + (j == labels[i] ? spec.signal : 0.0);
    std::vector<int> order(static_cast<std::size_t>(spec.n));
    for (int i = 0; i < spec.n; ++i) order[i] = i;
    std::mt19937_64 split_rng(derive_seed(spec.seed, "split"));
    std::shuffle(order.begin(), order.end(), split_rng);
    const int train_count = static_cast<int>(std::lround(spec.train_fraction * spec.n));
    std::vector<bool> train_mask(static_cast<std::size_t>(spec.n), false);
    std::vector<bool> test_mask(static_cast<std::size_t>(spec.n), false);
    for (int i = 0; i < spec.n; ++i)
        (i < train_count ? train_mask : test_mask)[order[i]] = true;
    return Graph::build(spec.n, spec.d, spec.blocks, std::move(X), std::move(labels),
                        std::move(edges), std::move(train_mask), std::move(test_mask));
}

// Seeded uniform sample of unlearning elements: nodes/features come from the
// train mask, edges from the edge set, all without replacement.
inline UnlearnRequest sample_unlearn_request(const Graph& g, RequestKind kind, double ratio,
                                             std::uint64_t seed) {
    if (!(ratio > 0.0) || ratio >= 1.0) throw ContractError("request ratio must be in (0, 1)");
    std::mt19937_64 rng(derive_seed(seed, "request"));
    UnlearnRequest req;
    req.kind = kind;
    if (kind == RequestKind::Edge) {
        if (g.edges.empty()) throw ContractError("cannot sample edges from edgeless graph");
        std::vector<Edge> pool = g.edges;
        std::shuffle(pool.begin(), pool.end(), rng);
        const std::size_t count =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(ratio * pool.size())));
        req.edge_list.assign(pool.begin(), pool.begin() + std::min(count, pool.size()));
        std::sort(req.edge_list.begin(), req.edge_list.end());
    } else {
        std::vector<int> pool;
        for (int i = 0; i < g.n; ++i)
            if (g.train_mask[i]) pool.push_back(i);
        if (pool.empty()) throw ContractError("cannot sample nodes from empty train mask");
        std::shuffle(pool.begin(), pool.end(), rng);
        const std::size_t count =
            std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(ratio * pool.size())));
        req.node_ids.insert(pool.begin(), pool.begin() + std::min(count, pool.size()));
    }
    return req;
}

struct EdgeAttackResult {
    Graph noisy;
    UnlearnRequest injected;  // Edge request listing the adversarial edges
};

// Injects ceil(ratio * |E|) edges between random nodes of differing labels;
// never duplicates an existing or injected edge.
inline EdgeAttackResult edge_attack(const Graph& g, double ratio, std::uint64_t seed) {
    const std::size_t want = static_cast<std::size_t>(
        std::ceil(ratio * static_cast<double>(g.edges.size())));
    if (want < 1) throw ContractError("edge_attack: ratio too small for this graph");
    bool multi_class = false;
    for (int i = 1; i < g.n && !multi_class; ++i) multi_class = g.y[i] != g.y[0];
    if (!multi_class) throw DomainError("edge_attack: graph has a single class");
    std::mt19937_64 rng(derive_seed(seed, "attack"));
    std::uniform_int_distribution<int> pick(0, g.n - 1);
    std::set<Edge> present(g.edges.begin(), g.edges.end());
    std::vector<Edge> injected;
    std::size_t guard = 0;
    while (injected.size() < want) {
        if (++guard > want * 1000 + 100000)
            throw TrainingFailure("edge_attack: could not place requested noisy edges");
        const int u = pick(rng);
        const int v = pick(rng);
        if (u == v || g.y[u] == g.y[v]) continue;
        const Edge e = canonical_edge(u, v);
        if (!present.insert(e).second) continue;
        injected.push_back(e);
    }
    std::sort(injected.begin(), injected.end());
    EdgeAttackResult result;
    result.noisy = g.with_edges({present.begin(), present.end()});
    result.injected.kind = RequestKind::Edge;
    result.injected.edge_list = std::move(injected);
    return result;
}

// The gold standard: a fresh model trained from scratch on the remaining graph.
inline Model retrain_oracle(const Graph& g, const UnlearnRequest& request, Arch arch,
                            const std::vector<int>& dims, const TrainConfig& cfg,
                            TrainResult* out_result = nullptr) {
    const GraphDelta delta = apply_request(g, request);
    Model m = init_model(arch, dims, cfg.seed);
    TrainResult tr = train(m, delta.remaining, cfg);
    if (out_result) *out_result = tr;
    return m;
}

// ---------------------------------------------------------------------------
// Comparison harness
// ---------------------------------------------------------------------------

struct ExperimentSpec {
    SbmSpec sbm;
    std::string graph_path;  // non-empty: load instead of generating
    std::vector<Arch> archs{Arch::GCN};
    RequestKind task = RequestKind::Node;
    double unlearn_ratio = 0.05;
    double attack_ratio = 0.0;  // > 0 switches to the edge-attack protocol
    int trials = 10;
    std::uint64_t seed = 0;
    std::vector<std::string> methods{"agu", "retrain"};
    int hidden = 64;
    int layers = 2;
    TrainConfig train_cfg;
    UnlearnConfig unlearn_cfg;
    int jobs = 1;

    void validate() const {
        if (trials < 1) throw ContractError("experiment: trial count must be >= 1");
        if (!(unlearn_ratio > 0.0) || unlearn_ratio >= 1.0)
            throw ContractError("experiment: unlearn ratio must be in (0, 1)");
        if (attack_ratio < 0.0 || attack_ratio >= 1.0)
            throw ContractError("experiment: attack ratio must be in [0, 1)");
        for (const auto& m : methods)
            if (m != "agu" && m != "retrain" && m != "reverse_ce" && m != "dec_baseline" &&
                m != "vanilla")
                throw ContractError("experiment: unknown method " + m);
    }
};

struct TrialResult {
    std::string method;
    std::string arch;
    int trial = 0;
    double f1 = 0.0;
    double time_ms = 0.0;
    int epochs = 0;
};

struct Aggregate {
    double mean_f1 = 0.0;
    double std_f1 = 0.0;
    double mean_time_ms = 0.0;
};

struct EvalReport {
    std::vector<TrialResult> trials;                // sorted (arch, method, trial)
    std::map<std::string, Aggregate> aggregates;    // key "arch/method"
};

namespace detail {

inline std::vector<int> model_dims(const Graph& g, int hidden, int layers) {
    std::vector<int> dims{g.d};
    for (int l = 1; l < layers; ++l) dims.push_back(hidden);
    dims.push_back(g.num_classes);
    return dims;
}

inline void run_trial(const ExperimentSpec& spec, Arch arch, int trial, const Graph& base,
                      std::vector<TrialResult>& out) {
    const std::uint64_t trial_seed = derive_seed(spec.seed, "trial", static_cast<std::uint64_t>(trial));
    Graph g = base;
    if (spec.graph_path.empty()) {
        SbmSpec sbm = spec.sbm;
        sbm.seed = derive_seed(trial_seed, "graph");
        g = generate_sbm(sbm);
    }
    const std::vector<int> dims = model_dims(g, spec.hidden, spec.layers);
    TrainConfig tcfg = spec.train_cfg;
    tcfg.seed = derive_seed(trial_seed, "train");
    UnlearnConfig ucfg = spec.unlearn_cfg;
    ucfg.seed = derive_seed(trial_seed, "unlearn");
    ucfg.filter.probe_seed = derive_seed(trial_seed, "filter");

    const bool attack = spec.attack_ratio > 0.0;
    UnlearnRequest request;
    Graph train_graph = g;
    if (attack) {
        EdgeAttackResult atk = edge_attack(g, spec.attack_ratio, derive_seed(trial_seed, "atk"));
        request = atk.injected;
        train_graph = std::move(atk.noisy);
    } else {
        request = sample_unlearn_request(g, spec.task, spec.unlearn_ratio,
                                         derive_seed(trial_seed, "req"));
    }
    Model f_g = init_model(arch, dims, tcfg.seed);
    train(f_g, train_graph, tcfg);
    const GraphDelta delta = apply_request(train_graph, request);

    auto evaluate = [](const Model& m, const Graph& eg) {
        return micro_f1(predict(m, eg).labels, eg.y, eg.test_mask);
    };

    for (const std::string& method : spec.methods) {
        TrialResult r;
        r.method = method;
        r.arch = arch_name(arch);
        r.trial = trial;
        if (method == "vanilla") {
            // The trained model as-is; under attack this is the noisy-graph model.
            const auto t0 = std::chrono::steady_clock::now();
            r.f1 = evaluate(f_g, attack ? train_graph : delta.remaining);
            r.time_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
            r.epochs = 0;
        } else if (method == "retrain") {
            // Under attack the oracle retrains on the clean graph.
            const auto t0 = std::chrono::steady_clock::now();
            Model oracle = init_model(arch, dims, tcfg.seed);
            if (attack)
                train(oracle, g, tcfg);
            else
                train(oracle, delta.remaining, tcfg);
            r.time_ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
            r.f1 = evaluate(oracle, attack ? g : delta.remaining);
            r.epochs = tcfg.epochs;
        } else {
            UnlearnMethod um = UnlearnMethod::Agu;
            if (method == "reverse_ce") um = UnlearnMethod::ReverseCe;
            if (method == "dec_baseline") um = UnlearnMethod::DecBaseline;
            UnlearnOutcome outcome = unlearn(f_g, train_graph, request, ucfg, um);
            r.time_ms = outcome.wall_time_ms;
            r.f1 = evaluate(outcome.model, delta.remaining);
            r.epochs = ucfg.epochs;
        }
        out.push_back(std::move(r));
    }
}

}  // namespace detail

// When the spec names a graph file the caller loads it once and passes it as
// `base`; every trial then reuses that graph instead of generating an SBM.
inline EvalReport run_experiment(const ExperimentSpec& spec, const Graph* base_graph = nullptr) {
    spec.validate();
    if (!spec.graph_path.empty() && !base_graph)
        throw ContractError("run_experiment: file-backed spec needs a loaded graph");
    const Graph base = base_graph ? *base_graph : Graph{};
    struct Cell {
        Arch arch;
        int trial;
    };
    std::vector<Cell> cells;
    for (Arch arch : spec.archs)
        for (int t = 0; t < spec.trials; ++t) cells.push_back({arch, t});
    std::vector<std::vector<TrialResult>> per_cell(cells.size());
    const int jobs = std::max(1, spec.jobs);
    if (jobs == 1) {
        for (std::size_t i = 0; i < cells.size(); ++i)
            detail::run_trial(spec, cells[i].arch, cells[i].trial, base, per_cell[i]);
    } else {
        std::atomic<std::size_t> next{0};
        auto worker = [&]() {
            while (true) {
                const std::size_t i = next.fetch_add(1);
                if (i >= cells.size()) return;
                detail::run_trial(spec, cells[i].arch, cells[i].trial, base, per_cell[i]);
            }
        };
        std::vector<std::thread> pool;
        for (int j = 0; j < jobs; ++j) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    EvalReport report;
    for (auto& cell : per_cell)
        for (auto& r : cell) report.trials.push_back(std::move(r));
    std::sort(report.trials.begin(), report.trials.end(), [](const auto& a, const auto& b) {
        if (a.arch != b.arch) return a.arch < b.arch;
        if (a.method != b.method) return a.method < b.method;
        return a.trial < b.trial;
    });
    std::map<std::string, std::vector<const TrialResult*>> groups;
    for (const auto& r : report.trials) groups[r.arch + "/" + r.method].push_back(&r);
    for (const auto& [key, rs] : groups) {
        Aggregate agg;
        for (const auto* r : rs) {
            agg.mean_f1 += r->f1;
            agg.mean_time_ms += r->time_ms;
        }
        agg.mean_f1 /= static_cast<double>(rs.size());
        agg.mean_time_ms /= static_cast<double>(rs.size());
        double var = 0.0;
        for (const auto* r : rs) var += (r->f1 - agg.mean_f1) * (r->f1 - agg.mean_f1);
        agg.std_f1 = std::sqrt(var / static_cast<double>(rs.size()));
        report.aggregates[key] = agg;
    }
    return report;
}

}  // namespace agu
