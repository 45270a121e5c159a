// Proper orthogonal decomposition by the method of snapshots: the n_s x n_s
// Gram matrix U^T U is eigendecomposed, singular values are the square roots
// of its eigenvalues, and the retained modes are U v_i / sigma_i. The
// truncation rank is the smallest m whose cumulative squared singular values
// reach the requested energy fraction.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "podsur/io.hpp"
#include "podsur/linalg.hpp"

namespace podsur {

struct PodOptions {
    double energy_threshold = 0.999;  // fraction of squared singular values to retain
    bool centered = false;            // subtract the snapshot mean before the SVD
    double rank_tol = 1e-12;          // sigma_i <= sigma_1 * rank_tol counts as rank deficiency
};

struct PodBasis {
    Matrix modes;                        // N x m, orthonormal columns
    std::vector<double> singular_values; // full descending list up to numerical rank
    int rank = 0;                        // retained mode count m
    double energy_threshold = 0.0;
    double captured_energy = 0.0;
    std::vector<double> mean;            // nonempty only for centered POD

    int n_nodes() const { return modes.rows; }
};

/// Smallest m whose cumulative squared fraction reaches the threshold.
inline int select_rank(const std::vector<double>& singular_values, double energy_threshold) {
    if (!(energy_threshold > 0.0) || energy_threshold > 1.0)
        throw std::invalid_argument("select_rank: threshold must be in (0, 1]");
    if (singular_values.empty())
        throw std::invalid_argument("select_rank: empty singular value list");

    long double total = 0.0L;
    for (std::size_t i = 0; i < singular_values.size(); ++i) {
        const double s = singular_values[i];
        if (s < 0.0) throw std::invalid_argument("select_rank: negative singular value");
        if (i > 0 && s > singular_values[i - 1])
            throw std::invalid_argument("select_rank: singular values not sorted descending");
        total += static_cast<long double>(s) * s;
    }
    if (total == 0.0L) throw std::invalid_argument("select_rank: all singular values are zero");

    long double cum = 0.0L;
    for (std::size_t i = 0; i < singular_values.size(); ++i) {
        cum += static_cast<long double>(singular_values[i]) * singular_values[i];
        if (static_cast<double>(cum / total) >= energy_threshold) return static_cast<int>(i) + 1;
    }
    return static_cast<int>(singular_values.size());
}

namespace detail {

// Two modified Gram-Schmidt passes. The Gram route loses orthogonality in
// the trailing modes when singular values are closely spaced; this restores
// it without leaving the spanned subspace.
inline void orthonormalize_columns(Matrix& m) {
    for (int k = 0; k < m.cols; ++k) {
        double* vk = m.col(k);
        for (int pass = 0; pass < 2; ++pass)
            for (int i = 0; i < k; ++i) {
                const double* vi = m.col(i);
                const double proj = dot(vi, vk, m.rows);
                for (int r = 0; r < m.rows; ++r) vk[r] -= proj * vi[r];
            }
        const double nrm = std::sqrt(dot(vk, vk, m.rows));
        if (!(nrm > 0.0))
            throw Error("compute_pod: mode " + std::to_string(k) + " collapsed to zero");
        for (int r = 0; r < m.rows; ++r) vk[r] /= nrm;
    }
}

// Fix the SVD sign ambiguity: the entry of largest magnitude is made
// positive (first occurrence wins) so stored bases are reproducible.
inline void canonicalize_sign(Matrix& m) {
    for (int k = 0; k < m.cols; ++k) {
        double* v = m.col(k);
        int arg = 0;
        for (int r = 1; r < m.rows; ++r)
            if (std::abs(v[r]) > std::abs(v[arg])) arg = r;
        if (v[arg] < 0.0)
            for (int r = 0; r < m.rows; ++r) v[r] = -v[r];
    }
}

}  // namespace detail

inline PodBasis compute_pod(const Matrix& snapshots, const PodOptions& opts = {}) {
    if (!(opts.energy_threshold > 0.0) || opts.energy_threshold > 1.0)
        throw std::invalid_argument("compute_pod: energy threshold must be in (0, 1]");
    if (snapshots.empty()) throw std::invalid_argument("compute_pod: empty snapshot matrix");

    Matrix u = snapshots;
    PodBasis basis;
    basis.energy_threshold = opts.energy_threshold;
    if (opts.centered) {
        basis.mean.assign(static_cast<std::size_t>(u.rows), 0.0);
        for (int j = 0; j < u.cols; ++j) {
            const double* cj = u.col(j);
            for (int i = 0; i < u.rows; ++i) basis.mean[static_cast<std::size_t>(i)] += cj[i];
        }
        for (double& v : basis.mean) v /= u.cols;
        for (int j = 0; j < u.cols; ++j) {
            double* cj = u.col(j);
            for (int i = 0; i < u.rows; ++i) cj[i] -= basis.mean[static_cast<std::size_t>(i)];
        }
    }

    bool all_zero = true;
    for (double v : u.data)
        if (v != 0.0) {
            all_zero = false;
            break;
        }
    if (all_zero) throw Error("compute_pod: snapshot matrix is identically zero");

    const Matrix gram = gram_ata(u);
    const SymmetricEigen eig = jacobi_eigensolve(gram);

    // sigma as the explicit norm of U v_i rather than sqrt(lambda_i): the
    // two agree to rounding, but the norm stays consistent with the modes
    // built from the same product, which keeps the truncation-energy
    // identity tight down to small singular values.
    std::vector<double> work(static_cast<std::size_t>(u.rows));
    std::vector<std::pair<double, int>> sigma_order;
    for (int i = 0; i < static_cast<int>(eig.values.size()); ++i) {
        matvec(u, eig.vectors.col(i), work.data());
        long double s2 = 0.0L;
        for (double v : work) s2 += static_cast<long double>(v) * v;
        sigma_order.emplace_back(static_cast<double>(std::sqrt(s2)), i);
    }
    std::stable_sort(sigma_order.begin(), sigma_order.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });

    const double sigma1 = sigma_order.front().first;
    if (!(sigma1 > 0.0)) throw Error("compute_pod: snapshot matrix is numerically zero");

    std::vector<int> eig_index;
    for (const auto& [sigma, idx] : sigma_order) {
        if (sigma <= sigma1 * opts.rank_tol) break;
        basis.singular_values.push_back(sigma);
        eig_index.push_back(idx);
    }

    basis.rank = select_rank(basis.singular_values, opts.energy_threshold);

    basis.modes = Matrix(u.rows, basis.rank);
    for (int k = 0; k < basis.rank; ++k) {
        matvec(u, eig.vectors.col(eig_index[static_cast<std::size_t>(k)]), basis.modes.col(k));
        const double inv = 1.0 / basis.singular_values[static_cast<std::size_t>(k)];
        double* mk = basis.modes.col(k);
        for (int i = 0; i < u.rows; ++i) mk[i] *= inv;
    }
    detail::orthonormalize_columns(basis.modes);
    detail::canonicalize_sign(basis.modes);

    long double total = 0.0L, kept = 0.0L;
    for (std::size_t i = 0; i < basis.singular_values.size(); ++i) {
        const long double s2 =
            static_cast<long double>(basis.singular_values[i]) * basis.singular_values[i];
        total += s2;
        if (static_cast<int>(i) < basis.rank) kept += s2;
    }
    basis.captured_energy = static_cast<double>(kept / total);
    return basis;
}

/// Coefficients of a field in the reduced basis (Euclidean projection).
inline std::vector<double> project(const PodBasis& basis, const std::vector<double>& field) {
    if (static_cast<int>(field.size()) != basis.modes.rows)
        throw std::invalid_argument("project: field length does not match basis");
    std::vector<double> a(static_cast<std::size_t>(basis.rank));
    if (basis.mean.empty()) {
        matvec_transposed(basis.modes, field.data(), a.data());
    } else {
        std::vector<double> shifted(field.size());
        for (std::size_t i = 0; i < field.size(); ++i) shifted[i] = field[i] - basis.mean[i];
        matvec_transposed(basis.modes, shifted.data(), a.data());
    }
    return a;
}

inline std::vector<double> reconstruct(const PodBasis& basis, const std::vector<double>& coeffs) {
    if (static_cast<int>(coeffs.size()) != basis.rank)
        throw std::invalid_argument("reconstruct: coefficient length does not match basis rank");
    std::vector<double> field(static_cast<std::size_t>(basis.modes.rows));
    matvec(basis.modes, coeffs.data(), field.data());
    if (!basis.mean.empty())
        for (std::size_t i = 0; i < field.size(); ++i) field[i] += basis.mean[i];
    return field;
}

// Container layout ("PODB", version 1): magic, u32 version, u64 N, u64 m,
// u64 r, f64 threshold, u8 centered, sigma[r], modes column-major, mean[N]
// when centered. The captured energy fraction is recomputed on load.
inline void save_basis(const PodBasis& basis, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("save_basis: cannot open " + path.string());
    io::write_magic(os, "PODB");
    io::write_u32(os, 1);
    io::write_u64(os, static_cast<std::uint64_t>(basis.modes.rows));
    io::write_u64(os, static_cast<std::uint64_t>(basis.rank));
    io::write_u64(os, static_cast<std::uint64_t>(basis.singular_values.size()));
    io::write_f64(os, basis.energy_threshold);
    io::write_u8(os, basis.mean.empty() ? 0 : 1);
    io::write_f64_array(os, basis.singular_values);
    io::write_f64_array(os, basis.modes.data);
    if (!basis.mean.empty()) io::write_f64_array(os, basis.mean);
    if (!os) throw Error("save_basis: write failed for " + path.string());
}

inline PodBasis load_basis(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("load_basis: cannot open " + path.string());
    io::expect_magic(is, "PODB", "basis");
    const std::uint32_t version = io::read_u32(is);
    if (version != 1)
        throw Error("load_basis: unsupported format version " + std::to_string(version));

    const std::uint64_t n = io::read_u64(is);
    const std::uint64_t m = io::read_u64(is);
    const std::uint64_t r = io::read_u64(is);
    if (n > (1u << 26) || m > r || r > (1u << 20))
        throw Error("load_basis: header dimensions out of range");

    PodBasis basis;
    basis.rank = static_cast<int>(m);
    basis.energy_threshold = io::read_f64(is);
    const bool centered = io::read_u8(is) != 0;
    io::read_f64_array(is, basis.singular_values, static_cast<std::size_t>(r));
    basis.modes = Matrix(static_cast<int>(n), static_cast<int>(m));
    io::read_f64_array(is, basis.modes.data, static_cast<std::size_t>(n * m));
    if (centered) io::read_f64_array(is, basis.mean, static_cast<std::size_t>(n));
    io::expect_eof(is, "basis");

    long double total = 0.0L, kept = 0.0L;
    for (std::size_t i = 0; i < basis.singular_values.size(); ++i) {
        const long double s2 =
            static_cast<long double>(basis.singular_values[i]) * basis.singular_values[i];
        total += s2;
        if (static_cast<int>(i) < basis.rank) kept += s2;
    }
    if (total == 0.0L) throw Error("load_basis: stored singular values are all zero");
    basis.captured_energy = static_cast<double>(kept / total);
    return basis;
}

/// Singular value decay and cumulative energy, one row per value (1-based).
inline void write_singular_values_csv(const PodBasis& basis, std::ostream& os) {
    os << "index,sigma,cumulative_energy\n";
    long double total = 0.0L;
    for (double s : basis.singular_values) total += static_cast<long double>(s) * s;
    long double cum = 0.0L;
    for (std::size_t i = 0; i < basis.singular_values.size(); ++i) {
        cum += static_cast<long double>(basis.singular_values[i]) * basis.singular_values[i];
        os << (i + 1) << ',' << io::full_precision(basis.singular_values[i]) << ','
           << io::full_precision(static_cast<double>(cum / total)) << '\n';
    }
}

}  // namespace podsur
