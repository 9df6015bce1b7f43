#pragma once

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "agu/graph.hpp"

namespace agu {

namespace detail {

inline std::vector<std::string> split_tabs(const std::string& line) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find('\t', start);
        if (pos == std::string::npos) {
            out.push_back(line.substr(start));
            break;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
    return out;
}

inline long parse_int(const std::string& s, const std::string& file, std::size_t line) {
    try {
        std::size_t pos = 0;
        const long v = std::stol(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(file, line, "expected integer, got '" + s + "'");
    }
}

inline double parse_double(const std::string& s, const std::string& file, std::size_t line) {
    try {
        std::size_t pos = 0;
        const double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument(s);
        return v;
    } catch (const std::exception&) {
        throw ParseError(file, line, "expected number, got '" + s + "'");
    }
}

}  // namespace detail

// graph.tsv: header `n d C`, then n lines `node_id<TAB>label<TAB>f1,f2,...`,
// then `#edges`, then one `u<TAB>v` line per undirected edge.
inline Graph load_graph_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open file");
    std::string line;
    std::size_t ln = 0;
    auto next_line = [&]() -> bool {
        while (std::getline(in, line)) {
            ++ln;
            if (!line.empty() && line.back() == '\r') line.pop_back();
            if (!line.empty()) return true;
        }
        return false;
    };
    if (!next_line()) throw ParseError(path, ln, "missing header");
    std::istringstream hdr(line);
    long n, d, c;
    if (!(hdr >> n >> d >> c) || n < 1 || d < 1 || c < 1)
        throw ParseError(path, ln, "header must be 'n d C'");
    std::vector<double> X(static_cast<std::size_t>(n) * d);
    std::vector<int> y(static_cast<std::size_t>(n), -1);
    std::vector<bool> seen(static_cast<std::size_t>(n), false);
    for (long i = 0; i < n; ++i) {
        if (!next_line()) throw ParseError(path, ln, "missing feature line");
        auto cells = detail::split_tabs(line);
        if (cells.size() != 3) throw ParseError(path, ln, "expected id<TAB>label<TAB>features");
        const long id = detail::parse_int(cells[0], path, ln);
        if (id < 0 || id >= n) throw ParseError(path, ln, "node id out of range");
        if (seen[id]) throw ParseError(path, ln, "duplicate node id");
        seen[id] = true;
        const long label = detail::parse_int(cells[1], path, ln);
        if (label < 0 || label >= c) throw ParseError(path, ln, "label out of range");
        y[id] = static_cast<int>(label);
        std::vector<double> feats;
        std::istringstream fs(cells[2]);
        std::string tok;
        while (std::getline(fs, tok, ',')) feats.push_back(detail::parse_double(tok, path, ln));
        if (feats.size() != static_cast<std::size_t>(d))
            throw ParseError(path, ln, "feature row has " + std::to_string(feats.size()) +
                                           " values, expected " + std::to_string(d));
        std::copy(feats.begin(), feats.end(), X.begin() + static_cast<std::size_t>(id) * d);
    }
    if (!next_line() || line != "#edges") throw ParseError(path, ln, "expected '#edges' marker");
    std::vector<Edge> edges;
    std::set<Edge> dedup;
    while (next_line()) {
        auto cells = detail::split_tabs(line);
        if (cells.size() != 2) throw ParseError(path, ln, "expected u<TAB>v");
        const long u = detail::parse_int(cells[0], path, ln);
        const long v = detail::parse_int(cells[1], path, ln);
        if (u < 0 || u >= n || v < 0 || v >= n) throw ParseError(path, ln, "edge id out of range");
        if (u == v) throw ParseError(path, ln, "self-loop edge");
        const Edge e = canonical_edge(static_cast<int>(u), static_cast<int>(v));
        if (!dedup.insert(e).second) throw ParseError(path, ln, "duplicate edge");
        edges.push_back(e);
    }
    return Graph::build(static_cast<int>(n), static_cast<int>(d), static_cast<int>(c),
                        std::move(X), std::move(y), std::move(edges));
}

// masks.tsv: `node_id<TAB>{train|test}` per line.
inline void load_masks_tsv(const std::string& path, Graph& g) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open file");
    std::fill(g.train_mask.begin(), g.train_mask.end(), false);
    std::fill(g.test_mask.begin(), g.test_mask.end(), false);
    std::string line;
    std::size_t ln = 0;
    while (std::getline(in, line)) {
        ++ln;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        auto cells = detail::split_tabs(line);
        if (cells.size() != 2) throw ParseError(path, ln, "expected id<TAB>{train|test}");
        const long id = detail::parse_int(cells[0], path, ln);
        if (id < 0 || id >= g.n) throw ParseError(path, ln, "node id out of range");
        if (g.train_mask[id] || g.test_mask[id]) throw ParseError(path, ln, "duplicate mask entry");
        if (cells[1] == "train")
            g.train_mask[id] = true;
        else if (cells[1] == "test")
            g.test_mask[id] = true;
        else
            throw ParseError(path, ln, "mask must be 'train' or 'test'");
    }
}

// request.tsv: first line `node|edge|feature`, then one id (or u<TAB>v) per line.
inline UnlearnRequest load_request_tsv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path, 0, "cannot open file");
    UnlearnRequest req;
    std::string line;
    std::size_t ln = 0;
    bool have_kind = false;
    std::set<Edge> dedup;
    while (std::getline(in, line)) {
        ++ln;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (!have_kind) {
            if (line == "node")
                req.kind = RequestKind::Node;
            else if (line == "edge")
                req.kind = RequestKind::Edge;
            else if (line == "feature")
                req.kind = RequestKind::Feature;
            else
                throw ParseError(path, ln, "kind must be node, edge or feature");
            have_kind = true;
            continue;
        }
        auto cells = detail::split_tabs(line);
        if (req.kind == RequestKind::Edge) {
            if (cells.size() != 2) throw ParseError(path, ln, "expected u<TAB>v");
            const long u = detail::parse_int(cells[0], path, ln);
            const long v = detail::parse_int(cells[1], path, ln);
            if (u == v) throw ParseError(path, ln, "self-loop edge");
            const Edge e = canonical_edge(static_cast<int>(u), static_cast<int>(v));
            if (!dedup.insert(e).second) throw ParseError(path, ln, "duplicate edge");
            req.edge_list.push_back(e);
        } else {
            if (cells.size() != 1) throw ParseError(path, ln, "expected one node id");
            const long id = detail::parse_int(cells[0], path, ln);
            if (!req.node_ids.insert(static_cast<int>(id)).second)
                throw ParseError(path, ln, "duplicate node id");
        }
    }
    if (!have_kind) throw ParseError(path, ln, "empty request file");
    if (req.node_ids.empty() && req.edge_list.empty())
        throw ParseError(path, ln, "request lists no elements");
    return req;
}

inline void save_graph_tsv(const Graph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    out << g.n << ' ' << g.d << ' ' << g.num_classes << '\n';
    out.precision(17);
    for (int i = 0; i < g.n; ++i) {
        out << i << '\t' << g.y[i] << '\t';
        for (int j = 0; j < g.d; ++j) {
            if (j) out << ',';
            out << g.X[static_cast<std::size_t>(i) * g.d + j];
        }
        out << '\n';
    }
    out << "#edges\n";
    for (const auto& [u, v] : g.edges) out << u << '\t' << v << '\n';
}

inline void save_masks_tsv(const Graph& g, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    for (int i = 0; i < g.n; ++i) {
        if (g.train_mask[i]) out << i << "\ttrain\n";
        else if (g.test_mask[i]) out << i << "\ttest\n";
    }
}

inline void save_request_tsv(const UnlearnRequest& r, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path);
    switch (r.kind) {
        case RequestKind::Node: out << "node\n"; break;
        case RequestKind::Edge: out << "edge\n"; break;
        case RequestKind::Feature: out << "feature\n"; break;
    }
    if (r.kind == RequestKind::Edge)
        for (const auto& [u, v] : r.edge_list) out << u << '\t' << v << '\n';
    else
        for (int id : r.node_ids) out << id << '\n';
}

}  // namespace agu
