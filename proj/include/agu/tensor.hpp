#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "agu/common.hpp"
#include "agu/sparse.hpp"

namespace agu {

constexpr double kKlFloor = 1e-10;   // floor on q inside KL to avoid log(0)
constexpr double kMaskedScore = -1e30;  // attention score of non-edges

// Dense row-major matrix of doubles with an optional gradient slot. Tensors
// returned by the ops below remember their inputs on a tape; backward() on a
// scalar root replays the tape in reverse topological order exactly once.
class Tensor {
public:
    struct Node {
        int rows = 0, cols = 0;
        std::vector<double> v;
        std::vector<double> g;
        bool requires_grad = false;
        std::vector<std::shared_ptr<Node>> parents;
        std::function<void(Node&)> backprop;  // accumulate into parents' g

        std::size_t size() const { return static_cast<std::size_t>(rows) * cols; }
        void ensure_grad() {
            if (g.empty()) g.assign(size(), 0.0);
        }
    };

    Tensor() : n_(std::make_shared<Node>()) {}

    static Tensor zeros(int rows, int cols, bool requires_grad = false) {
        Tensor t;
        t.n_->rows = rows;
        t.n_->cols = cols;
        t.n_->v.assign(static_cast<std::size_t>(rows) * cols, 0.0);
        t.n_->requires_grad = requires_grad;
        if (requires_grad) t.n_->ensure_grad();
        return t;
    }

    static Tensor from(int rows, int cols, std::vector<double> values,
                       bool requires_grad = false) {
        if (values.size() != static_cast<std::size_t>(rows) * cols)
            throw DimensionError("tensor data size does not match shape");
        Tensor t;
        t.n_->rows = rows;
        t.n_->cols = cols;
        t.n_->v = std::move(values);
        t.n_->requires_grad = requires_grad;
        if (requires_grad) t.n_->ensure_grad();
        return t;
    }

    int rows() const { return n_->rows; }
    int cols() const { return n_->cols; }
    std::size_t size() const { return n_->size(); }
    bool requires_grad() const { return n_->requires_grad; }

    double at(int i, int j) const { return n_->v[static_cast<std::size_t>(i) * cols() + j]; }
    double& at(int i, int j) { return n_->v[static_cast<std::size_t>(i) * cols() + j]; }
    const std::vector<double>& values() const { return n_->v; }
    std::vector<double>& values() { return n_->v; }
    const std::vector<double>& grad() const { return n_->g; }

    void zero_grad() {
        n_->ensure_grad();
        std::fill(n_->g.begin(), n_->g.end(), 0.0);
    }

    bool scalar() const { return rows() == 1 && cols() == 1; }
    double item() const {
        if (!scalar()) throw ContractError("item() on non-scalar tensor");
        return n_->v[0];
    }

    // Detached copy of the values; drops the tape.
    Tensor detach() const { return from(rows(), cols(), n_->v, false); }

    std::shared_ptr<Node> node() const { return n_; }

    friend void backward(const Tensor& root);
    friend Tensor make_op(int rows, int cols, std::vector<Tensor> parents);

private:
    std::shared_ptr<Node> n_;
    explicit Tensor(std::shared_ptr<Node> n) : n_(std::move(n)) {}
};

inline Tensor make_op(int rows, int cols, std::vector<Tensor> parents) {
    Tensor t = Tensor::zeros(rows, cols);
    bool rg = false;
    for (const auto& p : parents) {
        rg = rg || p.requires_grad();
        t.n_->parents.push_back(p.node());
    }
    t.n_->requires_grad = rg;
    if (rg) t.n_->ensure_grad();
    return t;
}

inline void backward(const Tensor& root) {
    if (!root.scalar()) throw ContractError("backward requires a scalar root");
    // Iterative post-order DFS over the tape; grads of intermediate nodes are
    // reset here, leaf grads accumulate across calls.
    std::vector<Tensor::Node*> order;
    std::unordered_set<Tensor::Node*> seen;
    struct Frame {
        Tensor::Node* node;
        std::size_t next;
    };
    std::vector<Frame> stack{{root.n_.get(), 0}};
    seen.insert(root.n_.get());
    while (!stack.empty()) {
        Frame& f = stack.back();
        if (f.next < f.node->parents.size()) {
            Tensor::Node* p = f.node->parents[f.next++].get();
            if (p->requires_grad && seen.insert(p).second) stack.push_back({p, 0});
        } else {
            order.push_back(f.node);
            stack.pop_back();
        }
    }
    for (Tensor::Node* n : order) {
        if (!n->backprop) continue;  // leaves keep accumulated grads
        n->ensure_grad();
        std::fill(n->g.begin(), n->g.end(), 0.0);
    }
    root.n_->ensure_grad();
    root.n_->g[0] = 1.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
        Tensor::Node* n = *it;
        if (n->requires_grad && n->backprop) n->backprop(*n);
    }
}

// ---------------------------------------------------------------------------
// Core ops
// ---------------------------------------------------------------------------

inline Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.cols() != b.rows()) throw DimensionError("matmul: inner dimensions differ");
    const int m = a.rows(), k = a.cols(), n = b.cols();
    Tensor out = make_op(m, n, {a, b});
    const auto& av = a.values();
    const auto& bv = b.values();
    auto& ov = out.values();
    for (int i = 0; i < m; ++i)
        for (int p = 0; p < k; ++p) {
            const double aip = av[static_cast<std::size_t>(i) * k + p];
            if (aip == 0.0) continue;
            for (int j = 0; j < n; ++j)
                ov[static_cast<std::size_t>(i) * n + j] += aip * bv[static_cast<std::size_t>(p) * n + j];
        }
    if (out.requires_grad()) {
        auto an = a.node();
        auto bn = b.node();
        out.node()->backprop = [an, bn, m, k, n](Tensor::Node& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (int i = 0; i < m; ++i)
                    for (int p = 0; p < k; ++p) {
                        double acc = 0.0;
                        for (int j = 0; j < n; ++j)
                            acc += self.g[static_cast<std::size_t>(i) * n + j] *
                                   bn->v[static_cast<std::size_t>(p) * n + j];
                        an->g[static_cast<std::size_t>(i) * k + p] += acc;
                    }
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int p = 0; p < k; ++p)
                    for (int i = 0; i < m; ++i) {
                        const double aip = an->v[static_cast<std::size_t>(i) * k + p];
                        if (aip == 0.0) continue;
                        for (int j = 0; j < n; ++j)
                            bn->g[static_cast<std::size_t>(p) * n + j] +=
                                aip * self.g[static_cast<std::size_t>(i) * n + j];
                    }
            }
        };
    }
    return out;
}

// Sparse-dense product; the sparse side is a constant (graph structure).
inline Tensor spmm(const SparseMatrix& s, const Tensor& d) {
    if (s.cols != d.rows()) throw DimensionError("spmm: inner dimensions differ");
    const int n = d.cols();
    Tensor out = make_op(s.rows, n, {d});
    const auto& dv = d.values();
    auto& ov = out.values();
    for (int i = 0; i < s.rows; ++i)
        for (std::size_t e = s.row_offsets[i]; e < s.row_offsets[i + 1]; ++e) {
            const double w = s.values[e];
            const int j = s.col_indices[e];
            for (int c = 0; c < n; ++c)
                ov[static_cast<std::size_t>(i) * n + c] += w * dv[static_cast<std::size_t>(j) * n + c];
        }
    if (out.requires_grad()) {
        auto dn = d.node();
        SparseMatrix sc = s;  // keep structure alive for backward
        out.node()->backprop = [dn, sc = std::move(sc), n](Tensor::Node& self) {
            dn->ensure_grad();
            for (int i = 0; i < sc.rows; ++i)
                for (std::size_t e = sc.row_offsets[i]; e < sc.row_offsets[i + 1]; ++e) {
                    const double w = sc.values[e];
                    const int j = sc.col_indices[e];
                    for (int c = 0; c < n; ++c)
                        dn->g[static_cast<std::size_t>(j) * n + c] +=
                            w * self.g[static_cast<std::size_t>(i) * n + c];
                }
        };
    }
    return out;
}

namespace detail {
inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw DimensionError(std::string(op) + ": shape mismatch");
}

inline Tensor elementwise_binary(const Tensor& a, const Tensor& b, const char* name,
                                 double (*fwd)(double, double),
                                 double (*dfa)(double, double),
                                 double (*dfb)(double, double)) {
    check_same_shape(a, b, name);
    Tensor out = make_op(a.rows(), a.cols(), {a, b});
    const std::size_t sz = out.size();
    for (std::size_t i = 0; i < sz; ++i) out.values()[i] = fwd(a.values()[i], b.values()[i]);
    if (out.requires_grad()) {
        auto an = a.node();
        auto bn = b.node();
        out.node()->backprop = [an, bn, sz, dfa, dfb](Tensor::Node& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < sz; ++i)
                    an->g[i] += dfa(an->v[i], bn->v[i]) * self.g[i];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (std::size_t i = 0; i < sz; ++i)
                    bn->g[i] += dfb(an->v[i], bn->v[i]) * self.g[i];
            }
        };
    }
    return out;
}
}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
    return detail::elementwise_binary(
        a, b, "add", [](double x, double y) { return x + y; },
        [](double, double) { return 1.0; }, [](double, double) { return 1.0; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
    return detail::elementwise_binary(
        a, b, "sub", [](double x, double y) { return x - y; },
        [](double, double) { return 1.0; }, [](double, double) { return -1.0; });
}

inline Tensor mul(const Tensor& a, const Tensor& b) {
    return detail::elementwise_binary(
        a, b, "mul", [](double x, double y) { return x * y; },
        [](double, double y) { return y; }, [](double x, double) { return x; });
}

inline Tensor scale(const Tensor& a, double c) {
    Tensor out = make_op(a.rows(), a.cols(), {a});
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = c * a.values()[i];
    if (out.requires_grad()) {
        auto an = a.node();
        out.node()->backprop = [an, c](Tensor::Node& self) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i) an->g[i] += c * self.g[i];
        };
    }
    return out;
}

// Broadcast a 1 x c row vector over every row of a.
inline Tensor add_row(const Tensor& a, const Tensor& row) {
    if (row.rows() != 1 || row.cols() != a.cols())
        throw DimensionError("add_row: bias must be 1 x cols");
    Tensor out = make_op(a.rows(), a.cols(), {a, row});
    const int c = a.cols();
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < c; ++j)
            out.at(i, j) = a.at(i, j) + row.values()[static_cast<std::size_t>(j)];
    if (out.requires_grad()) {
        auto an = a.node();
        auto rn = row.node();
        out.node()->backprop = [an, rn, c](Tensor::Node& self) {
            if (an->requires_grad) {
                an->ensure_grad();
                for (std::size_t i = 0; i < self.size(); ++i) an->g[i] += self.g[i];
            }
            if (rn->requires_grad) {
                rn->ensure_grad();
                for (int i = 0; i < self.rows; ++i)
                    for (int j = 0; j < c; ++j)
                        rn->g[static_cast<std::size_t>(j)] += self.g[static_cast<std::size_t>(i) * c + j];
            }
        };
    }
    return out;
}

namespace detail {
inline Tensor elementwise_unary(const Tensor& a, double (*fwd)(double), double (*dfd)(double)) {
    Tensor out = make_op(a.rows(), a.cols(), {a});
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = fwd(a.values()[i]);
    if (out.requires_grad()) {
        auto an = a.node();
        out.node()->backprop = [an, dfd](Tensor::Node& self) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i) an->g[i] += dfd(an->v[i]) * self.g[i];
        };
    }
    return out;
}
}  // namespace detail

inline Tensor relu(const Tensor& a) {
    return detail::elementwise_unary(
        a, [](double x) { return x > 0.0 ? x : 0.0; },
        [](double x) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Tensor leaky_relu(const Tensor& a, double slope) {
    Tensor out = make_op(a.rows(), a.cols(), {a});
    for (std::size_t i = 0; i < out.size(); ++i) {
        const double x = a.values()[i];
        out.values()[i] = x > 0.0 ? x : slope * x;
    }
    if (out.requires_grad()) {
        auto an = a.node();
        out.node()->backprop = [an, slope](Tensor::Node& self) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i)
                an->g[i] += (an->v[i] > 0.0 ? 1.0 : slope) * self.g[i];
        };
    }
    return out;
}

inline Tensor exp_(const Tensor& a) {
    return detail::elementwise_unary(a, [](double x) { return std::exp(x); },
                                     [](double x) { return std::exp(x); });
}

inline Tensor log_(const Tensor& a) {
    for (double x : a.values())
        if (!(x > 0.0)) throw DomainError("log of non-positive value");
    return detail::elementwise_unary(a, [](double x) { return std::log(x); },
                                     [](double x) { return 1.0 / x; });
}

inline Tensor concat_cols(const Tensor& a, const Tensor& b) {
    if (a.rows() != b.rows()) throw DimensionError("concat_cols: row counts differ");
    const int ca = a.cols(), cb = b.cols();
    Tensor out = make_op(a.rows(), ca + cb, {a, b});
    for (int i = 0; i < a.rows(); ++i) {
        for (int j = 0; j < ca; ++j) out.at(i, j) = a.at(i, j);
        for (int j = 0; j < cb; ++j) out.at(i, ca + j) = b.at(i, j);
    }
    if (out.requires_grad()) {
        auto an = a.node();
        auto bn = b.node();
        out.node()->backprop = [an, bn, ca, cb](Tensor::Node& self) {
            const int c = ca + cb;
            if (an->requires_grad) {
                an->ensure_grad();
                for (int i = 0; i < self.rows; ++i)
                    for (int j = 0; j < ca; ++j)
                        an->g[static_cast<std::size_t>(i) * ca + j] +=
                            self.g[static_cast<std::size_t>(i) * c + j];
            }
            if (bn->requires_grad) {
                bn->ensure_grad();
                for (int i = 0; i < self.rows; ++i)
                    for (int j = 0; j < cb; ++j)
                        bn->g[static_cast<std::size_t>(i) * cb + j] +=
                            self.g[static_cast<std::size_t>(i) * c + ca + j];
            }
        };
    }
    return out;
}

inline Tensor gather_rows(const Tensor& t, const std::vector<int>& indices) {
    for (int i : indices)
        if (i < 0 || i >= t.rows()) throw DimensionError("gather_rows: index out of range");
    const int c = t.cols();
    Tensor out = make_op(static_cast<int>(indices.size()), c, {t});
    for (std::size_t r = 0; r < indices.size(); ++r)
        for (int j = 0; j < c; ++j) out.at(static_cast<int>(r), j) = t.at(indices[r], j);
    if (out.requires_grad()) {
        auto tn = t.node();
        out.node()->backprop = [tn, indices, c](Tensor::Node& self) {
            tn->ensure_grad();
            for (std::size_t r = 0; r < indices.size(); ++r)
                for (int j = 0; j < c; ++j)
                    tn->g[static_cast<std::size_t>(indices[r]) * c + j] +=
                        self.g[r * c + j];
        };
    }
    return out;
}

inline Tensor row_softmax(const Tensor& a) {
    const int n = a.rows(), c = a.cols();
    Tensor out = make_op(n, c, {a});
    for (int i = 0; i < n; ++i) {
        double mx = a.at(i, 0);
        for (int j = 1; j < c; ++j) mx = std::max(mx, a.at(i, j));
        double denom = 0.0;
        for (int j = 0; j < c; ++j) {
            const double e = std::exp(a.at(i, j) - mx);
            out.at(i, j) = e;
            denom += e;
        }
        for (int j = 0; j < c; ++j) out.at(i, j) /= denom;
    }
    if (out.requires_grad()) {
        auto an = a.node();
        out.node()->backprop = [an, n, c](Tensor::Node& self) {
            an->ensure_grad();
            for (int i = 0; i < n; ++i) {
                double dot = 0.0;
                for (int j = 0; j < c; ++j)
                    dot += self.g[static_cast<std::size_t>(i) * c + j] *
                           self.v[static_cast<std::size_t>(i) * c + j];
                for (int j = 0; j < c; ++j) {
                    const double s = self.v[static_cast<std::size_t>(i) * c + j];
                    an->g[static_cast<std::size_t>(i) * c + j] +=
                        s * (self.g[static_cast<std::size_t>(i) * c + j] - dot);
                }
            }
        };
    }
    return out;
}

inline Tensor row_log_softmax(const Tensor& a) {
    const int n = a.rows(), c = a.cols();
    Tensor out = make_op(n, c, {a});
    for (int i = 0; i < n; ++i) {
        double mx = a.at(i, 0);
        for (int j = 1; j < c; ++j) mx = std::max(mx, a.at(i, j));
        double denom = 0.0;
        for (int j = 0; j < c; ++j) denom += std::exp(a.at(i, j) - mx);
        const double lse = mx + std::log(denom);
        for (int j = 0; j < c; ++j) out.at(i, j) = a.at(i, j) - lse;
    }
    if (out.requires_grad()) {
        auto an = a.node();
        out.node()->backprop = [an, n, c](Tensor::Node& self) {
            an->ensure_grad();
            for (int i = 0; i < n; ++i) {
                double gsum = 0.0;
                for (int j = 0; j < c; ++j) gsum += self.g[static_cast<std::size_t>(i) * c + j];
                for (int j = 0; j < c; ++j)
                    an->g[static_cast<std::size_t>(i) * c + j] +=
                        self.g[static_cast<std::size_t>(i) * c + j] -
                        std::exp(self.v[static_cast<std::size_t>(i) * c + j]) * gsum;
            }
        };
    }
    return out;
}

inline Tensor sum(const Tensor& a) {
    Tensor out = make_op(1, 1, {a});
    double acc = 0.0;
    for (double x : a.values()) acc += x;
    out.values()[0] = acc;
    if (out.requires_grad()) {
        auto an = a.node();
        out.node()->backprop = [an](Tensor::Node& self) {
            an->ensure_grad();
            for (std::size_t i = 0; i < an->g.size(); ++i) an->g[i] += self.g[0];
        };
    }
    return out;
}

// Elementwise min with a constant; gradient is zero where the cap is active.
inline Tensor min_const(const Tensor& a, double cap) {
    Tensor out = make_op(a.rows(), a.cols(), {a});
    for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] = std::min(a.values()[i], cap);
    if (out.requires_grad()) {
        auto an = a.node();
        out.node()->backprop = [an, cap](Tensor::Node& self) {
            an->ensure_grad();
            for (std::size_t i = 0; i < self.size(); ++i)
                if (an->v[i] < cap) an->g[i] += self.g[i];
        };
    }
    return out;
}

// Attention score matrix for single-head GAT: out(i,j) = src(i) + dst(j) on
// edges of the mask (self-loops included by the caller), a large negative
// constant elsewhere so row_softmax assigns them exactly zero weight.
inline Tensor masked_pair_scores(const Tensor& src, const Tensor& dst, const SparseMatrix& mask) {
    if (src.cols() != 1 || dst.cols() != 1 || src.rows() != mask.rows || dst.rows() != mask.cols)
        throw DimensionError("masked_pair_scores: expected n x 1 score vectors");
    const int n = mask.rows;
    Tensor out = make_op(n, mask.cols, {src, dst});
    std::fill(out.values().begin(), out.values().end(), kMaskedScore);
    for (int i = 0; i < n; ++i)
        for (std::size_t e = mask.row_offsets[i]; e < mask.row_offsets[i + 1]; ++e) {
            const int j = mask.col_indices[e];
            out.at(i, j) = src.values()[static_cast<std::size_t>(i)] +
                           dst.values()[static_cast<std::size_t>(j)];
        }
    if (out.requires_grad()) {
        auto sn = src.node();
        auto dn = dst.node();
        SparseMatrix mc = mask;
        out.node()->backprop = [sn, dn, mc = std::move(mc)](Tensor::Node& self) {
            if (sn->requires_grad) sn->ensure_grad();
            if (dn->requires_grad) dn->ensure_grad();
            for (int i = 0; i < mc.rows; ++i)
                for (std::size_t e = mc.row_offsets[i]; e < mc.row_offsets[i + 1]; ++e) {
                    const int j = mc.col_indices[e];
                    const double gij = self.g[static_cast<std::size_t>(i) * mc.cols + j];
                    if (sn->requires_grad) sn->g[static_cast<std::size_t>(i)] += gij;
                    if (dn->requires_grad) dn->g[static_cast<std::size_t>(j)] += gij;
                }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// Losses
// ---------------------------------------------------------------------------

inline Tensor cross_entropy(const Tensor& logits, const std::vector<int>& labels,
                            const std::vector<int>& row_subset) {
    if (row_subset.empty()) throw ContractError("cross_entropy: empty row subset");
    if (labels.size() != static_cast<std::size_t>(logits.rows()))
        throw DimensionError("cross_entropy: one label per row required");
    const int c = logits.cols();
    for (int i : row_subset) {
        if (i < 0 || i >= logits.rows()) throw DimensionError("cross_entropy: row out of range");
        if (labels[i] < 0 || labels[i] >= c) throw DomainError("cross_entropy: label out of range");
    }
    Tensor out = make_op(1, 1, {logits});
    // Cache softmax probabilities of the selected rows for backward.
    auto probs = std::make_shared<std::vector<double>>(row_subset.size() * c);
    double loss = 0.0;
    for (std::size_t r = 0; r < row_subset.size(); ++r) {
        const int i = row_subset[r];
        double mx = logits.at(i, 0);
        for (int j = 1; j < c; ++j) mx = std::max(mx, logits.at(i, j));
        double denom = 0.0;
        for (int j = 0; j < c; ++j) denom += std::exp(logits.at(i, j) - mx);
        const double lse = mx + std::log(denom);
        for (int j = 0; j < c; ++j) (*probs)[r * c + j] = std::exp(logits.at(i, j) - lse);
        loss -= logits.at(i, labels[i]) - lse;
    }
    out.values()[0] = loss / static_cast<double>(row_subset.size());
    if (out.requires_grad()) {
        auto ln = logits.node();
        out.node()->backprop = [ln, labels, row_subset, probs, c](Tensor::Node& self) {
            ln->ensure_grad();
            const double s = self.g[0] / static_cast<double>(row_subset.size());
            for (std::size_t r = 0; r < row_subset.size(); ++r) {
                const int i = row_subset[r];
                for (int j = 0; j < c; ++j) {
                    double d = (*probs)[r * c + j];
                    if (j == labels[i]) d -= 1.0;
                    ln->g[static_cast<std::size_t>(i) * c + j] += s * d;
                }
            }
        };
    }
    return out;
}

// Mean over the subset of KL(p_i || q_i); q is floored at kKlFloor.
inline Tensor kl_divergence(const Tensor& p, const Tensor& q,
                            const std::vector<int>& row_subset) {
    if (row_subset.empty()) throw ContractError("kl_divergence: empty row subset");
    detail::check_same_shape(p, q, "kl_divergence");
    const int c = p.cols();
    for (const Tensor* t : {&p, &q})
        for (int i : row_subset) {
            if (i < 0 || i >= t->rows()) throw DimensionError("kl_divergence: row out of range");
            double s = 0.0;
            for (int j = 0; j < c; ++j) {
                const double x = t->at(i, j);
                if (x < 0.0) throw DomainError("kl_divergence: negative probability");
                s += x;
            }
            if (std::abs(s - 1.0) > 1e-6) throw DomainError("kl_divergence: row does not sum to 1");
        }
    Tensor out = make_op(1, 1, {p, q});
    double acc = 0.0;
    for (int i : row_subset)
        for (int j = 0; j < c; ++j) {
            const double pij = p.at(i, j);
            if (pij <= 0.0) continue;
            acc += pij * std::log(pij / std::max(q.at(i, j), kKlFloor));
        }
    out.values()[0] = acc / static_cast<double>(row_subset.size());
    if (out.requires_grad()) {
        auto pn = p.node();
        auto qn = q.node();
        out.node()->backprop = [pn, qn, row_subset, c](Tensor::Node& self) {
            const double s = self.g[0] / static_cast<double>(row_subset.size());
            if (qn->requires_grad) {
                qn->ensure_grad();
                for (int i : row_subset)
                    for (int j = 0; j < c; ++j) {
                        const double pij = pn->v[static_cast<std::size_t>(i) * c + j];
                        const double qij = qn->v[static_cast<std::size_t>(i) * c + j];
                        // Floored q entries sit on the flat part of max(q, floor).
                        if (pij > 0.0 && qij > kKlFloor)
                            qn->g[static_cast<std::size_t>(i) * c + j] -= s * pij / qij;
                    }
            }
            if (pn->requires_grad) {
                pn->ensure_grad();
                for (int i : row_subset)
                    for (int j = 0; j < c; ++j) {
                        const double pij = pn->v[static_cast<std::size_t>(i) * c + j];
                        if (pij <= 0.0) continue;
                        const double qf = std::max(qn->v[static_cast<std::size_t>(i) * c + j], kKlFloor);
                        pn->g[static_cast<std::size_t>(i) * c + j] += s * (std::log(pij / qf) + 1.0);
                    }
            }
        };
    }
    return out;
}

inline Tensor mse(const Tensor& a, const Tensor& b) {
    detail::check_same_shape(a, b, "mse");
    Tensor out = make_op(1, 1, {a, b});
    const std::size_t sz = a.size();
    double acc = 0.0;
    for (std::size_t i = 0; i < sz; ++i) {
        const double d = a.values()[i] - b.values()[i];
        acc += d * d;
    }
    out.values()[0] = acc / static_cast<double>(sz);
    if (out.requires_grad()) {
        auto an = a.node();
        auto bn = b.node();
        out.node()->backprop = [an, bn, sz](Tensor::Node& self) {
            const double s = 2.0 * self.g[0] / static_cast<double>(sz);
            for (std::size_t i = 0; i < sz; ++i) {
                const double d = an->v[i] - bn->v[i];
                if (an->requires_grad) {
                    an->ensure_grad();
                    an->g[i] += s * d;
                }
                if (bn->requires_grad) {
                    bn->ensure_grad();
                    bn->g[i] -= s * d;
                }
            }
        };
    }
    return out;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

struct AdamConfig {
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;  // L2 added into the gradient
};

struct AdamState {
    std::vector<double> m, v;
    long step = 0;
};

inline void adam_step(Tensor& param, AdamState& state, const AdamConfig& cfg) {
    const std::size_t sz = param.size();
    if (param.grad().size() != sz) throw DimensionError("adam_step: parameter has no gradient");
    if (state.m.empty()) {
        state.m.assign(sz, 0.0);
        state.v.assign(sz, 0.0);
    }
    if (state.m.size() != sz) throw DimensionError("adam_step: state shape mismatch");
    ++state.step;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.step));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.step));
    auto& v = param.values();
    const auto& g = param.grad();
    for (std::size_t i = 0; i < sz; ++i) {
        const double gi = g[i] + cfg.weight_decay * v[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * gi;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * gi * gi;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        v[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

}  // namespace agu
