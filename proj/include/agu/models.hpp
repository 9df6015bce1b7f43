#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "agu/common.hpp"
#include "agu/graph.hpp"
#include "agu/tensor.hpp"

namespace agu {

enum class Arch { GCN, SGC, GAT, GIN, SAGE };

inline const char* arch_name(Arch a) {
    switch (a) {
        case Arch::GCN: return "gcn";
        case Arch::SGC: return "sgc";
        case Arch::GAT: return "gat";
        case Arch::GIN: return "gin";
        case Arch::SAGE: return "sage";
    }
    return "?";
}

inline Arch arch_from_name(const std::string& s) {
    if (s == "gcn") return Arch::GCN;
    if (s == "sgc") return Arch::SGC;
    if (s == "gat") return Arch::GAT;
    if (s == "gin") return Arch::GIN;
    if (s == "sage") return Arch::SAGE;
    throw DomainError("unknown architecture: " + s);
}

// Degree-based architectures normalize messages by neighbor degrees, which
// widens their affected range by one hop.
inline bool degree_based(Arch a) { return a == Arch::GCN || a == Arch::SGC; }

constexpr double kGatLeakySlope = 0.2;

struct NamedParam {
    std::string name;
    Tensor tensor;
};

struct Model {
    Arch arch = Arch::GCN;
    int layers = 2;
    std::vector<int> dims;  // d_in, hidden..., C
    std::vector<NamedParam> params;
    std::uint64_t init_seed = 0;
    bool deterministic = true;

    Tensor& param(const std::string& name) {
        for (auto& p : params)
            if (p.name == name) return p.tensor;
        throw ReferenceError("unknown parameter " + name);
    }
    const Tensor& param(const std::string& name) const {
        for (const auto& p : params)
            if (p.name == name) return p.tensor;
        throw ReferenceError("unknown parameter " + name);
    }
};

inline Model clone_model(const Model& m) {
    Model c = m;
    c.params.clear();
    for (const auto& p : m.params)
        c.params.push_back({p.name, Tensor::from(p.tensor.rows(), p.tensor.cols(),
                                                 p.tensor.values(), p.tensor.requires_grad())});
    return c;
}

namespace detail {
inline Tensor glorot(int rows, int cols, std::mt19937_64& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    std::uniform_real_distribution<double> dist(-limit, limit);
    std::vector<double> v(static_cast<std::size_t>(rows) * cols);
    for (double& x : v) x = dist(rng);
    return Tensor::from(rows, cols, std::move(v), true);
}
}  // namespace detail

// Glorot-uniform weights, zero biases; identical (arch, dims, seed) yields
// bitwise-identical parameters.
inline Model init_model(Arch arch, std::vector<int> dims, std::uint64_t seed) {
    if (dims.size() < 2) throw DimensionError("init_model: need at least input and output dims");
    Model m;
    m.arch = arch;
    m.layers = static_cast<int>(dims.size()) - 1;
    m.dims = std::move(dims);
    m.init_seed = seed;
    std::mt19937_64 rng(seed);
    auto add = [&m](const std::string& name, Tensor t) { m.params.push_back({name, std::move(t)}); };
    switch (arch) {
        case Arch::SGC:
            add("W", detail::glorot(m.dims.front(), m.dims.back(), rng));
            add("b", Tensor::zeros(1, m.dims.back(), true));
            break;
        case Arch::GCN:
            for (int l = 0; l < m.layers; ++l) {
                add("W" + std::to_string(l), detail::glorot(m.dims[l], m.dims[l + 1], rng));
                add("b" + std::to_string(l), Tensor::zeros(1, m.dims[l + 1], true));
            }
            break;
        case Arch::GAT:
            for (int l = 0; l < m.layers; ++l) {
                add("W" + std::to_string(l), detail::glorot(m.dims[l], m.dims[l + 1], rng));
                add("a_src" + std::to_string(l), detail::glorot(m.dims[l + 1], 1, rng));
                add("a_dst" + std::to_string(l), detail::glorot(m.dims[l + 1], 1, rng));
                add("b" + std::to_string(l), Tensor::zeros(1, m.dims[l + 1], true));
            }
            break;
        case Arch::GIN:
            for (int l = 0; l < m.layers; ++l) {
                add("W1_" + std::to_string(l), detail::glorot(m.dims[l], m.dims[l + 1], rng));
                add("b1_" + std::to_string(l), Tensor::zeros(1, m.dims[l + 1], true));
                add("W2_" + std::to_string(l), detail::glorot(m.dims[l + 1], m.dims[l + 1], rng));
                add("b2_" + std::to_string(l), Tensor::zeros(1, m.dims[l + 1], true));
            }
            break;
        case Arch::SAGE:
            for (int l = 0; l < m.layers; ++l) {
                add("Wself" + std::to_string(l), detail::glorot(m.dims[l], m.dims[l + 1], rng));
                add("Wnbr" + std::to_string(l), detail::glorot(m.dims[l], m.dims[l + 1], rng));
                add("b" + std::to_string(l), Tensor::zeros(1, m.dims[l + 1], true));
            }
            break;
    }
    return m;
}

struct ForwardResult {
    Tensor logits;     // n x C
    Tensor embedding;  // pre-logit representation (input to the final layer)
};

struct DropoutContext {
    double rate = 0.0;
    std::mt19937_64* rng = nullptr;  // required when rate > 0
};

namespace detail {
inline Tensor dropout(const Tensor& t, const DropoutContext& ctx) {
    if (ctx.rate <= 0.0) return t;
    if (!ctx.rng) throw ContractError("dropout requires an RNG");
    std::uniform_real_distribution<double> dist(0.0, 1.0);
    std::vector<double> mask(t.size());
    const double keep = 1.0 - ctx.rate;
    for (double& x : mask) x = dist(*ctx.rng) < keep ? 1.0 / keep : 0.0;
    return mul(t, Tensor::from(t.rows(), t.cols(), std::move(mask)));
}
}  // namespace detail

inline ForwardResult forward(const Model& m, const Graph& g, DropoutContext drop = {}) {
    if (g.d != m.dims.front()) throw DimensionError("forward: feature dimension mismatch");
    if (m.deterministic) drop = {};
    Tensor h = Tensor::from(g.n, g.d, g.X);
    Tensor embedding = h;
    const int K = m.layers;
    switch (m.arch) {
        case Arch::SGC: {
            const SparseMatrix s = normalized_adjacency(g, true);
            for (int l = 0; l < K; ++l) h = spmm(s, h);
            embedding = h;
            Tensor logits = add_row(matmul(h, m.param("W")), m.param("b"));
            return {logits, embedding};
        }
        case Arch::GCN: {
            const SparseMatrix s = normalized_adjacency(g, true);
            for (int l = 0; l < K; ++l) {
                h = detail::dropout(h, drop);
                h = add_row(matmul(spmm(s, h), m.param("W" + std::to_string(l))),
                            m.param("b" + std::to_string(l)));
                if (l + 1 < K) {
                    h = relu(h);
                    embedding = h;
                }
            }
            return {h, embedding};
        }
        case Arch::GAT: {
            const SparseMatrix mask = adjacency_with_self(g);
            for (int l = 0; l < K; ++l) {
                h = detail::dropout(h, drop);
                Tensor wh = matmul(h, m.param("W" + std::to_string(l)));
                Tensor su = matmul(wh, m.param("a_src" + std::to_string(l)));
                Tensor sv = matmul(wh, m.param("a_dst" + std::to_string(l)));
                Tensor scores = leaky_relu(masked_pair_scores(su, sv, mask), kGatLeakySlope);
                Tensor alpha = row_softmax(scores);
                h = add_row(matmul(alpha, wh), m.param("b" + std::to_string(l)));
                if (l + 1 < K) {
                    h = relu(h);
                    embedding = h;
                }
            }
            return {h, embedding};
        }
        case Arch::GIN: {
            const SparseMatrix s = adjacency_with_self(g);  // (1 + eps) h + sum, eps = 0
            for (int l = 0; l < K; ++l) {
                h = detail::dropout(h, drop);
                Tensor z = spmm(s, h);
                Tensor hid = relu(add_row(matmul(z, m.param("W1_" + std::to_string(l))),
                                          m.param("b1_" + std::to_string(l))));
                h = add_row(matmul(hid, m.param("W2_" + std::to_string(l))),
                            m.param("b2_" + std::to_string(l)));
                if (l + 1 < K) {
                    h = relu(h);
                    embedding = h;
                }
            }
            return {h, embedding};
        }
        case Arch::SAGE: {
            const SparseMatrix s = mean_adjacency(g);  // empty neighborhood -> zero vector
            for (int l = 0; l < K; ++l) {
                h = detail::dropout(h, drop);
                Tensor self_term = matmul(h, m.param("Wself" + std::to_string(l)));
                Tensor nbr_term = matmul(spmm(s, h), m.param("Wnbr" + std::to_string(l)));
                h = add_row(add(self_term, nbr_term), m.param("b" + std::to_string(l)));
                if (l + 1 < K) {
                    h = relu(h);
                    embedding = h;
                }
            }
            return {h, embedding};
        }
    }
    throw ContractError("unreachable");
}

struct Prediction {
    std::vector<int> labels;
    Tensor probabilities;  // n x C, detached
};

inline Prediction predict(const Model& m, const Graph& g) {
    ForwardResult fr = forward(m, g);
    Tensor probs = row_softmax(fr.logits.detach());
    std::vector<int> labels(static_cast<std::size_t>(g.n));
    for (int i = 0; i < g.n; ++i) {
        int best = 0;
        for (int j = 1; j < probs.cols(); ++j)
            if (probs.at(i, j) > probs.at(i, best)) best = j;
        labels[i] = best;
    }
    return {std::move(labels), probs.detach()};
}

struct TrainConfig {
    double lr = 0.01;
    int epochs = 200;
    double weight_decay = 5e-4;
    std::uint64_t seed = 0;
    double dropout_rate = 0.5;
};

struct TrainResult {
    std::vector<double> loss_trace;
    double final_train_accuracy = 0.0;
};

inline TrainResult train(Model& m, const Graph& g, const TrainConfig& cfg) {
    if (cfg.lr <= 0.0) throw ContractError("train: lr must be positive");
    std::vector<int> train_rows;
    for (int i = 0; i < g.n; ++i)
        if (g.train_mask[i]) train_rows.push_back(i);
    if (train_rows.empty()) throw ContractError("train: empty train mask");
    AdamConfig opt{cfg.lr, 0.9, 0.999, 1e-8, cfg.weight_decay};
    std::vector<AdamState> states(m.params.size());
    std::mt19937_64 drop_rng(derive_seed(cfg.seed, "dropout"));
    TrainResult result;
    m.deterministic = !(cfg.dropout_rate > 0.0);
    for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
        for (auto& p : m.params) p.tensor.zero_grad();
        DropoutContext drop{cfg.dropout_rate, &drop_rng};
        ForwardResult fr = forward(m, g, drop);
        Tensor loss = cross_entropy(fr.logits, g.y, train_rows);
        if (!std::isfinite(loss.item()))
            throw TrainingFailure("training diverged (non-finite loss) at epoch " +
                                  std::to_string(epoch));
        backward(loss);
        for (std::size_t i = 0; i < m.params.size(); ++i)
            adam_step(m.params[i].tensor, states[i], opt);
        result.loss_trace.push_back(loss.item());
    }
    m.deterministic = true;
    Prediction pred = predict(m, g);
    int correct = 0;
    for (int i : train_rows)
        if (pred.labels[i] == g.y[i]) ++correct;
    result.final_train_accuracy = static_cast<double>(correct) / train_rows.size();
    return result;
}

// ---------------------------------------------------------------------------
// Checkpoint format: magic, arch, K, dims, seed, named float64 blobs, FNV hash.
// ---------------------------------------------------------------------------

namespace detail {
template <typename T>
void put(std::string& buf, T v) {
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf.append(raw, sizeof(T));  // little-endian host assumed
}

template <typename T>
T get(const std::string& buf, std::size_t& pos) {
    if (pos + sizeof(T) > buf.size()) throw ParseError("checkpoint", 0, "truncated file");
    T v;
    std::memcpy(&v, buf.data() + pos, sizeof(T));
    pos += sizeof(T);
    return v;
}
}  // namespace detail

inline void save_model(const Model& m, const std::string& path) {
    std::string buf;
    buf.append("AGUM");
    detail::put<std::uint32_t>(buf, 1);  // format version
    detail::put<std::uint8_t>(buf, static_cast<std::uint8_t>(m.arch));
    detail::put<std::int32_t>(buf, m.layers);
    detail::put<std::int32_t>(buf, static_cast<std::int32_t>(m.dims.size()));
    for (int dv : m.dims) detail::put<std::int32_t>(buf, dv);
    detail::put<std::uint64_t>(buf, m.init_seed);
    detail::put<std::int32_t>(buf, static_cast<std::int32_t>(m.params.size()));
    for (const auto& p : m.params) {
        detail::put<std::int32_t>(buf, static_cast<std::int32_t>(p.name.size()));
        buf.append(p.name);
        detail::put<std::int32_t>(buf, p.tensor.rows());
        detail::put<std::int32_t>(buf, p.tensor.cols());
        for (double x : p.tensor.values()) detail::put<double>(buf, x);
    }
    detail::put<std::uint64_t>(buf, fnv1a_bytes(buf.data(), buf.size()));
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path);
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
}

inline Model load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ParseError(path, 0, "cannot open file");
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
    if (buf.size() < 12 || buf.compare(0, 4, "AGUM") != 0)
        throw ParseError(path, 0, "not a model checkpoint");
    const std::size_t body = buf.size() - sizeof(std::uint64_t);
    std::size_t hpos = body;
    const std::uint64_t stored = detail::get<std::uint64_t>(buf, hpos);
    if (stored != fnv1a_bytes(buf.data(), body))
        throw ParseError(path, 0, "checkpoint hash mismatch");
    std::size_t pos = 4;
    const auto version = detail::get<std::uint32_t>(buf, pos);
    if (version != 1) throw ParseError(path, 0, "unsupported checkpoint version");
    Model m;
    m.arch = static_cast<Arch>(detail::get<std::uint8_t>(buf, pos));
    m.layers = detail::get<std::int32_t>(buf, pos);
    const auto ndims = detail::get<std::int32_t>(buf, pos);
    m.dims.resize(static_cast<std::size_t>(ndims));
    for (auto& dv : m.dims) dv = detail::get<std::int32_t>(buf, pos);
    m.init_seed = detail::get<std::uint64_t>(buf, pos);
    const auto nparams = detail::get<std::int32_t>(buf, pos);
    for (int i = 0; i < nparams; ++i) {
        const auto len = detail::get<std::int32_t>(buf, pos);
        if (pos + static_cast<std::size_t>(len) > buf.size())
            throw ParseError(path, 0, "truncated file");
        std::string name = buf.substr(pos, static_cast<std::size_t>(len));
        pos += static_cast<std::size_t>(len);
        const int rows = detail::get<std::int32_t>(buf, pos);
        const int cols = detail::get<std::int32_t>(buf, pos);
        std::vector<double> v(static_cast<std::size_t>(rows) * cols);
        for (double& x : v) x = detail::get<double>(buf, pos);
        m.params.push_back({std::move(name), Tensor::from(rows, cols, std::move(v), true)});
    }
    return m;
}

}  // namespace agu
