// P1 Galerkin assembly and solve for the steady diffusion-reaction problem
//   -div(kappa grad u) + beta u = f   on the rectangle,
//   u = q_in on the inflow edge (x = 0), u = 0 on the remaining walls.
//
// assemble() builds the parameter-independent stiffness/mass pair and the
// load vector; impose_dirichlet() forms kappa*S + beta*M and eliminates the
// constrained nodes symmetrically so the free block stays SPD; solve() is a
// Jacobi-preconditioned conjugate gradient.
#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "podsur/io.hpp"
#include "podsur/mesh.hpp"
#include "podsur/sampling.hpp"
#include "podsur/sparse.hpp"

namespace podsur {

using FieldVector = std::vector<double>;
using SourceFn = std::function<double(double, double)>;

/// A named source term so artifact metadata can identify it.
struct SourceTerm {
    std::string id;
    SourceFn fn;
};

/// Known source identifiers: "sin_pi_xy" (default), "zero", "one".
inline SourceTerm make_source(const std::string& id) {
    if (id == "sin_pi_xy")
        return {id, [](double x, double y) {
                    return std::sin(std::numbers::pi * x) * std::sin(std::numbers::pi * y);
                }};
    if (id == "zero") return {id, [](double, double) { return 0.0; }};
    if (id == "one") return {id, [](double, double) { return 1.0; }};
    throw std::invalid_argument("make_source: unknown source id '" + id + "'");
}

struct GalerkinSystem {
    CsrMatrix stiffness;       // integrals of grad(phi_i) . grad(phi_j)
    CsrMatrix mass;            // integrals of phi_i phi_j
    std::vector<double> load;  // mass * (source sampled at nodes)
};

/// Element stiffness is area-weighted gradient products; element mass is the
/// exact P1 matrix (area/12) * [[2,1,1],[1,2,1],[1,1,2]]. The load vector
/// integrates the nodal interpolant of the source exactly.
inline GalerkinSystem assemble(const Mesh& mesh, const SourceFn& source) {
    const int n = mesh.node_count();
    std::vector<Triplet> st;
    std::vector<Triplet> mt;
    st.reserve(mesh.triangles.size() * 9);
    mt.reserve(mesh.triangles.size() * 9);

    for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
        const auto geom = element_geometry(mesh, t);
        const auto& tri = mesh.triangles[t];
        const double a12 = geom.area / 12.0;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                const double sij = geom.area * (geom.grad[i][0] * geom.grad[j][0] +
                                                geom.grad[i][1] * geom.grad[j][1]);
                st.push_back({tri[i], tri[j], sij});
                mt.push_back({tri[i], tri[j], (i == j ? 2.0 : 1.0) * a12});
            }
        }
    }

    GalerkinSystem sys;
    sys.stiffness = CsrMatrix::from_triplets(n, n, st);
    sys.mass = CsrMatrix::from_triplets(n, n, mt);

    std::vector<double> nodal(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
        const double v = source(mesh.nodes[i].x, mesh.nodes[i].y);
        if (!std::isfinite(v))
            throw Error("assemble: source evaluated non-finite at node " + std::to_string(i));
        nodal[static_cast<std::size_t>(i)] = v;
    }
    sys.mass.multiply(nodal, sys.load);
    return sys;
}

struct AssembledSystem {
    CsrMatrix matrix;                              // constrained kappa*S + beta*M
    std::vector<double> rhs;                       // prescribed values at constrained rows
    std::vector<std::pair<int, double>> dirichlet; // node -> value, ascending node
    std::vector<int> free_dofs;                    // ascending
};

inline AssembledSystem impose_dirichlet(const GalerkinSystem& sys, const Mesh& mesh,
                                        double kappa, double beta, double q_in) {
    if (!(kappa > 0.0)) throw std::invalid_argument("impose_dirichlet: kappa must be > 0");
    if (beta < 0.0) throw std::invalid_argument("impose_dirichlet: beta must be >= 0");
    const int n = mesh.node_count();
    if (sys.stiffness.n_rows != n || sys.mass.n_rows != n)
        throw std::invalid_argument("impose_dirichlet: system does not match mesh");

    AssembledSystem out;
    out.matrix = sys.stiffness;  // stiffness and mass share one sparsity pattern
    for (std::size_t k = 0; k < out.matrix.values.size(); ++k)
        out.matrix.values[k] = kappa * sys.stiffness.values[k] + beta * sys.mass.values[k];
    out.rhs = sys.load;

    std::vector<double> prescribed(static_cast<std::size_t>(n), 0.0);
    std::vector<char> constrained(static_cast<std::size_t>(n), 0);
    for (int i = 0; i < n; ++i) {
        switch (mesh.node_class[static_cast<std::size_t>(i)]) {
            case NodeClass::inflow:
                constrained[static_cast<std::size_t>(i)] = 1;
                prescribed[static_cast<std::size_t>(i)] = q_in;
                break;
            case NodeClass::wall:
                constrained[static_cast<std::size_t>(i)] = 1;
                break;
            case NodeClass::interior:
                break;
        }
    }

    CsrMatrix& a = out.matrix;
    for (int i = 0; i < n; ++i) {
        const bool row_fixed = constrained[static_cast<std::size_t>(i)] != 0;
        for (int k = a.row_offsets[i]; k < a.row_offsets[i + 1]; ++k) {
            const int j = a.col_indices[static_cast<std::size_t>(k)];
            double& v = a.values[static_cast<std::size_t>(k)];
            if (row_fixed) {
                v = (j == i) ? 1.0 : 0.0;
            } else if (constrained[static_cast<std::size_t>(j)]) {
                out.rhs[static_cast<std::size_t>(i)] -= v * prescribed[static_cast<std::size_t>(j)];
                v = 0.0;
            }
        }
        if (row_fixed) out.rhs[static_cast<std::size_t>(i)] = prescribed[static_cast<std::size_t>(i)];
    }

    for (int i = 0; i < n; ++i) {
        if (constrained[static_cast<std::size_t>(i)])
            out.dirichlet.emplace_back(i, prescribed[static_cast<std::size_t>(i)]);
        else
            out.free_dofs.push_back(i);
    }
    return out;
}

struct CgOptions {
    double tol = 1e-10;  // relative residual on the free block
    int max_iter = 0;    // 0 means 20 * unknown count
};

struct SolveStats {
    int iterations = 0;
    double relative_residual = 0.0;
};

/// Preconditioned CG. Constrained rows are identity with matching rhs, so
/// starting from the prescribed values keeps their residual exactly zero and
/// the iteration effectively runs on the free block.
inline FieldVector solve(const AssembledSystem& system, const CgOptions& opts = {},
                         SolveStats* stats = nullptr) {
    if (!(opts.tol > 0.0) || opts.tol >= 1.0)
        throw std::invalid_argument("solve: tol must be in (0, 1)");
    if (opts.max_iter < 0) throw std::invalid_argument("solve: max_iter must be >= 1");
    const int n = system.matrix.n_rows;
    const int max_iter = opts.max_iter > 0 ? opts.max_iter : 20 * n;
    if (max_iter < 1) throw std::invalid_argument("solve: max_iter must be >= 1");

    FieldVector x(static_cast<std::size_t>(n), 0.0);
    for (const auto& [node, value] : system.dirichlet) x[static_cast<std::size_t>(node)] = value;

    double rhs_norm2 = 0.0;
    for (int i : system.free_dofs) {
        const double b = system.rhs[static_cast<std::size_t>(i)];
        rhs_norm2 += b * b;
    }
    const double target = opts.tol * std::sqrt(rhs_norm2);

    std::vector<double> r(static_cast<std::size_t>(n));
    std::vector<double> z(static_cast<std::size_t>(n));
    std::vector<double> p(static_cast<std::size_t>(n));
    std::vector<double> q(static_cast<std::size_t>(n));

    system.matrix.multiply(x, q);
    for (int i = 0; i < n; ++i)
        r[static_cast<std::size_t>(i)] = system.rhs[static_cast<std::size_t>(i)] - q[static_cast<std::size_t>(i)];

    auto residual_norm = [&] {
        double s = 0.0;
        for (double v : r) s += v * v;
        return std::sqrt(s);
    };

    double rnorm = residual_norm();
    if (rnorm <= target) {
        if (stats) *stats = {0, rhs_norm2 > 0.0 ? rnorm / std::sqrt(rhs_norm2) : 0.0};
        return x;
    }

    std::vector<double> inv_diag = system.matrix.diagonal();
    for (double& d : inv_diag) {
        if (d == 0.0) throw Error("solve: zero diagonal entry, system not assembled correctly");
        d = 1.0 / d;
    }

    for (int i = 0; i < n; ++i) z[static_cast<std::size_t>(i)] = inv_diag[static_cast<std::size_t>(i)] * r[static_cast<std::size_t>(i)];
    p = z;
    double rho = 0.0;
    for (int i = 0; i < n; ++i) rho += r[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i)];

    int iter = 0;
    for (; iter < max_iter; ++iter) {
        system.matrix.multiply(p, q);
        double pq = 0.0;
        for (int i = 0; i < n; ++i) pq += p[static_cast<std::size_t>(i)] * q[static_cast<std::size_t>(i)];
        if (pq <= 0.0)
            throw Error("solve: conjugate gradient breakdown (matrix not SPD on the free block)");
        const double alpha = rho / pq;
        for (int i = 0; i < n; ++i) x[static_cast<std::size_t>(i)] += alpha * p[static_cast<std::size_t>(i)];
        for (int i = 0; i < n; ++i) r[static_cast<std::size_t>(i)] -= alpha * q[static_cast<std::size_t>(i)];

        rnorm = residual_norm();
        if (rnorm <= target) {
            ++iter;
            break;
        }

        for (int i = 0; i < n; ++i) z[static_cast<std::size_t>(i)] = inv_diag[static_cast<std::size_t>(i)] * r[static_cast<std::size_t>(i)];
        double rho_next = 0.0;
        for (int i = 0; i < n; ++i) rho_next += r[static_cast<std::size_t>(i)] * z[static_cast<std::size_t>(i)];
        const double omega = rho_next / rho;
        for (int i = 0; i < n; ++i) p[static_cast<std::size_t>(i)] = z[static_cast<std::size_t>(i)] + omega * p[static_cast<std::size_t>(i)];
        rho = rho_next;
    }

    const double rel = rhs_norm2 > 0.0 ? rnorm / std::sqrt(rhs_norm2) : rnorm;
    if (rnorm > target)
        throw Error("solve: conjugate gradient did not converge in " + std::to_string(max_iter) +
                    " iterations (relative residual " + io::full_precision(rel) + ")");
    if (stats) *stats = {iter, rel};
    return x;
}

/// Assemble, impose and solve for one parameter triple.
inline FieldVector solve_instance(const Mesh& mesh, const ParameterSample& mu,
                                  const SourceFn& source, const CgOptions& opts = {},
                                  SolveStats* stats = nullptr) {
    const GalerkinSystem sys = assemble(mesh, source);
    const AssembledSystem constrained = impose_dirichlet(sys, mesh, mu.kappa, mu.beta, mu.q_in);
    return solve(constrained, opts, stats);
}

/// CSV export: header "x,y,u", one row per node, row-major over the grid.
inline void export_field_csv(const Mesh& mesh, const FieldVector& field, std::ostream& os) {
    if (field.size() != mesh.nodes.size())
        throw std::invalid_argument("export_field_csv: field length does not match mesh");
    os << "x,y,u\n";
    for (std::size_t i = 0; i < field.size(); ++i)
        os << io::full_precision(mesh.nodes[i].x) << ',' << io::full_precision(mesh.nodes[i].y)
           << ',' << io::full_precision(field[i]) << '\n';
}

}  // namespace podsur
