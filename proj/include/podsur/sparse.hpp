// Compressed-row sparse matrix with a triplet builder. Duplicate triplets
// are summed in insertion order so that symmetric element contributions
// accumulate identically on both sides of the diagonal.
#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace podsur {

struct Triplet {
    int row = 0;
    int col = 0;
    double value = 0.0;
};

struct CsrMatrix {
    int n_rows = 0;
    int n_cols = 0;
    std::vector<int> row_offsets;  // n_rows + 1
    std::vector<int> col_indices;  // strictly increasing within a row
    std::vector<double> values;

    std::size_t nnz() const { return values.size(); }

    static CsrMatrix from_triplets(int n_rows, int n_cols, const std::vector<Triplet>& triplets) {
        if (n_rows < 0 || n_cols < 0)
            throw std::invalid_argument("CsrMatrix: negative dimension");
        for (const auto& t : triplets)
            if (t.row < 0 || t.row >= n_rows || t.col < 0 || t.col >= n_cols)
                throw std::invalid_argument("CsrMatrix: triplet index out of range");

        std::vector<std::size_t> order(triplets.size());
        std::iota(order.begin(), order.end(), std::size_t{0});
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            if (triplets[a].row != triplets[b].row) return triplets[a].row < triplets[b].row;
            return triplets[a].col < triplets[b].col;
        });

        CsrMatrix m;
        m.n_rows = n_rows;
        m.n_cols = n_cols;
        m.row_offsets.assign(static_cast<std::size_t>(n_rows) + 1, 0);
        m.col_indices.reserve(triplets.size());
        m.values.reserve(triplets.size());

        int last_row = -1;
        int last_col = -1;
        for (std::size_t k : order) {
            const Triplet& t = triplets[k];
            if (t.row == last_row && t.col == last_col) {
                m.values.back() += t.value;
            } else {
                m.col_indices.push_back(t.col);
                m.values.push_back(t.value);
                last_row = t.row;
                last_col = t.col;
            }
            m.row_offsets[static_cast<std::size_t>(t.row) + 1] = static_cast<int>(m.values.size());
        }
        // rows with no entries inherit the previous offset
        for (std::size_t r = 1; r < m.row_offsets.size(); ++r)
            m.row_offsets[r] = std::max(m.row_offsets[r], m.row_offsets[r - 1]);
        return m;
    }

    /// y = A x
    void multiply(const std::vector<double>& x, std::vector<double>& y) const {
        y.assign(static_cast<std::size_t>(n_rows), 0.0);
        const double* v = values.data();
        const int* ci = col_indices.data();
        for (int i = 0; i < n_rows; ++i) {
            double s = 0.0;
            for (int k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
                s += v[k] * x[static_cast<std::size_t>(ci[k])];
            y[static_cast<std::size_t>(i)] = s;
        }
    }

    std::vector<double> diagonal() const {
        std::vector<double> d(static_cast<std::size_t>(n_rows), 0.0);
        for (int i = 0; i < n_rows; ++i)
            for (int k = row_offsets[i]; k < row_offsets[i + 1]; ++k)
                if (col_indices[static_cast<std::size_t>(k)] == i)
                    d[static_cast<std::size_t>(i)] = values[static_cast<std::size_t>(k)];
        return d;
    }
};

}  // namespace podsur
