#pragma once

#include <algorithm>
#include <cstddef>
#include <utility>
#include <vector>

#include "agu/common.hpp"

namespace agu {

// Compressed sparse row matrix. Column indices are strictly increasing within
// each row; accumulation order in products follows that index order, which
// pins bitwise reproducibility.
struct SparseMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<std::size_t> row_offsets;  // size rows+1
    std::vector<int> col_indices;
    std::vector<double> values;

    SparseMatrix() : row_offsets(1, 0) {}
    SparseMatrix(int r, int c) : rows(r), cols(c), row_offsets(static_cast<std::size_t>(r) + 1, 0) {}

    std::size_t nnz() const { return values.size(); }

    static SparseMatrix from_triplets(int r, int c,
                                      std::vector<std::pair<std::pair<int, int>, double>> trip) {
        std::sort(trip.begin(), trip.end(),
                  [](const auto& a, const auto& b) { return a.first < b.first; });
        SparseMatrix m(r, c);
        m.col_indices.reserve(trip.size());
        m.values.reserve(trip.size());
        int prev_row = -1, prev_col = -1;
        for (const auto& [rc, v] : trip) {
            auto [i, j] = rc;
            if (i < 0 || i >= r || j < 0 || j >= c)
                throw DimensionError("sparse triplet out of range");
            if (i == prev_row && j == prev_col)
                throw ContractError("duplicate sparse entry");
            while (prev_row < i) {
                m.row_offsets[static_cast<std::size_t>(++prev_row)] = m.values.size();
            }
            m.col_indices.push_back(j);
            m.values.push_back(v);
            prev_col = j;
        }
        while (prev_row < r) m.row_offsets[static_cast<std::size_t>(++prev_row)] = m.values.size();
        m.row_offsets[static_cast<std::size_t>(r)] = m.values.size();
        return m;
    }

    void check_invariants() const {
        if (row_offsets.size() != static_cast<std::size_t>(rows) + 1)
            throw ContractError("row offsets size mismatch");
        if (row_offsets.back() != values.size() || col_indices.size() != values.size())
            throw ContractError("nnz count mismatch");
        for (int i = 0; i < rows; ++i) {
            if (row_offsets[i] > row_offsets[i + 1]) throw ContractError("row offsets not monotone");
            for (std::size_t k = row_offsets[i]; k + 1 < row_offsets[i + 1]; ++k)
                if (col_indices[k] >= col_indices[k + 1])
                    throw ContractError("column indices not strictly increasing");
        }
    }

    std::vector<double> densify() const {
        std::vector<double> d(static_cast<std::size_t>(rows) * cols, 0.0);
        for (int i = 0; i < rows; ++i)
            for (std::size_t k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
                d[static_cast<std::size_t>(i) * cols + col_indices[k]] = values[k];
        return d;
    }
};

}  // namespace agu
