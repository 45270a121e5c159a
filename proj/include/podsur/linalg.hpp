// Small dense linear algebra kernels: column-major matrix, Cholesky solves
// and a cyclic Jacobi symmetric eigensolver. Sizes stay modest (snapshot
// Gram matrices, damped normal equations), so plain loops are enough.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace podsur {

/// Dense column-major matrix of doubles.
struct Matrix {
    int rows = 0;
    int cols = 0;
    std::vector<double> data;  // data[j*rows + i]

    Matrix() = default;
    Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {
        if (r < 0 || c < 0) throw std::invalid_argument("Matrix: negative dimension");
    }

    double& operator()(int i, int j) { return data[static_cast<std::size_t>(j) * rows + i]; }
    double operator()(int i, int j) const { return data[static_cast<std::size_t>(j) * rows + i]; }

    double* col(int j) { return data.data() + static_cast<std::size_t>(j) * rows; }
    const double* col(int j) const { return data.data() + static_cast<std::size_t>(j) * rows; }

    bool empty() const { return rows == 0 || cols == 0; }
};

inline double dot(const double* a, const double* b, int n) {
    double s = 0.0;
    for (int i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
    return dot(a.data(), b.data(), static_cast<int>(a.size()));
}

inline double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

inline void axpy(double alpha, const std::vector<double>& x, std::vector<double>& y) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

/// y = A x
inline void matvec(const Matrix& a, const double* x, double* y) {
    std::fill(y, y + a.rows, 0.0);
    for (int j = 0; j < a.cols; ++j) {
        const double xj = x[j];
        const double* cj = a.col(j);
        for (int i = 0; i < a.rows; ++i) y[i] += cj[i] * xj;
    }
}

/// y = A^T x
inline void matvec_transposed(const Matrix& a, const double* x, double* y) {
    for (int j = 0; j < a.cols; ++j) y[j] = dot(a.col(j), x, a.rows);
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
    if (a.cols != b.rows) throw std::invalid_argument("matmul: shape mismatch");
    Matrix c(a.rows, b.cols);
    for (int j = 0; j < b.cols; ++j)
        matvec(a, b.col(j), c.col(j));
    return c;
}

inline Matrix transpose(const Matrix& a) {
    Matrix t(a.cols, a.rows);
    for (int j = 0; j < a.cols; ++j)
        for (int i = 0; i < a.rows; ++i) t(j, i) = a(i, j);
    return t;
}

/// A^T A, symmetric, computed on the upper triangle and mirrored.
inline Matrix gram_ata(const Matrix& a) {
    Matrix g(a.cols, a.cols);
    for (int j = 0; j < a.cols; ++j)
        for (int i = 0; i <= j; ++i) {
            const double v = dot(a.col(i), a.col(j), a.rows);
            g(i, j) = v;
            g(j, i) = v;
        }
    return g;
}

/// A A^T via rank-1 column updates (rows of A are strided, columns are not).
inline Matrix gram_aat(const Matrix& a) {
    Matrix g(a.rows, a.rows);
    for (int k = 0; k < a.cols; ++k) {
        const double* ck = a.col(k);
        for (int j = 0; j < a.rows; ++j) {
            const double cjk = ck[j];
            if (cjk == 0.0) continue;
            double* gj = g.col(j);
            for (int i = 0; i <= j; ++i) gj[i] += ck[i] * cjk;
        }
    }
    for (int j = 0; j < a.rows; ++j)
        for (int i = 0; i < j; ++i) g(j, i) = g(i, j);
    return g;
}

/// In-place lower Cholesky A = L L^T. Returns false if a pivot is not
/// strictly positive (matrix not SPD to working precision).
inline bool cholesky_factor(Matrix& a) {
    const int n = a.rows;
    if (n != a.cols) throw std::invalid_argument("cholesky: matrix not square");
    for (int j = 0; j < n; ++j) {
        double d = a(j, j);
        for (int k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
        if (!(d > 0.0) || !std::isfinite(d)) return false;
        const double ljj = std::sqrt(d);
        a(j, j) = ljj;
        for (int i = j + 1; i < n; ++i) {
            double s = a(i, j);
            for (int k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
            a(i, j) = s / ljj;
        }
    }
    return true;
}

/// Solve L L^T x = b given the factor from cholesky_factor; b is overwritten.
inline void cholesky_solve(const Matrix& l, std::vector<double>& b) {
    const int n = l.rows;
    for (int i = 0; i < n; ++i) {
        double s = b[i];
        for (int k = 0; k < i; ++k) s -= l(i, k) * b[k];
        b[i] = s / l(i, i);
    }
    for (int i = n - 1; i >= 0; --i) {
        double s = b[i];
        for (int k = i + 1; k < n; ++k) s -= l(k, i) * b[k];
        b[i] = s / l(i, i);
    }
}

struct SymmetricEigen {
    std::vector<double> values;  // descending
    Matrix vectors;              // column k pairs with values[k]
};

/// Cyclic Jacobi eigensolver for symmetric matrices. Deterministic sweep
/// order; converges quadratically once off-diagonal mass is small.
inline SymmetricEigen jacobi_eigensolve(Matrix a, int max_sweeps = 100) {
    const int n = a.rows;
    if (n != a.cols) throw std::invalid_argument("jacobi_eigensolve: matrix not square");
    Matrix v(n, n);
    for (int i = 0; i < n; ++i) v(i, i) = 1.0;

    double scale = 0.0;
    for (int i = 0; i < n; ++i) scale = std::max(scale, std::abs(a(i, i)));
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < j; ++i) scale = std::max(scale, std::abs(a(i, j)));
    const double stop = scale > 0.0 ? 1e-14 * scale : 0.0;

    for (int sweep = 0; sweep < max_sweeps && n > 1; ++sweep) {
        double off = 0.0;
        for (int j = 0; j < n; ++j)
            for (int i = 0; i < j; ++i) off = std::max(off, std::abs(a(i, j)));
        if (off <= stop) break;

        for (int p = 0; p < n - 1; ++p) {
            for (int q = p + 1; q < n; ++q) {
                const double apq = a(p, q);
                if (std::abs(apq) <= stop) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (int k = 0; k < n; ++k) {
                    const double akp = a(k, p), akq = a(k, q);
                    a(k, p) = c * akp - s * akq;
                    a(k, q) = s * akp + c * akq;
                }
                for (int k = 0; k < n; ++k) {
                    const double apk = a(p, k), aqk = a(q, k);
                    a(p, k) = c * apk - s * aqk;
                    a(q, k) = s * apk + c * aqk;
                }
                for (int k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return a(i, i) > a(j, j); });

    SymmetricEigen out;
    out.values.resize(n);
    out.vectors = Matrix(n, n);
    for (int k = 0; k < n; ++k) {
        out.values[k] = a(order[k], order[k]);
        std::copy(v.col(order[k]), v.col(order[k]) + n, out.vectors.col(k));
    }
    return out;
}

}  // namespace podsur
