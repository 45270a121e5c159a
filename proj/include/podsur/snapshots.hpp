// Snapshot generation and persistence. A snapshot set is the dense N x n_s
// matrix of nodal solutions, one column per parameter sample, plus the
// metadata needed to reproduce it (grid, source id, seed, ranges).
//
// Container layout ("PODS", version 1, little-endian):
//   magic, u32 version,
//   u64 N, u64 n_s, u64 nx, u64 ny, f64 lx, f64 ly,
//   u64 seed, string source_id,
//   f64 x6 ranges (kappa/beta/qin min,max), u8 kappa_log_uniform,
//   f64 x (N*n_s) fields column-major,
//   f64 x (3*n_s) parameter table.
#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <string>
#include <vector>

#include "podsur/fem.hpp"
#include "podsur/io.hpp"
#include "podsur/linalg.hpp"
#include "podsur/mesh.hpp"
#include "podsur/sampling.hpp"

namespace podsur {

struct GridMeta {
    double lx = 0.0;
    double ly = 0.0;
    int nx = 0;
    int ny = 0;

    bool operator==(const GridMeta&) const = default;
};

struct SnapshotSet {
    GridMeta grid;
    std::string source_id;
    std::uint64_t seed = 0;  // seed used to draw params (0 if drawn externally)
    ParameterRanges ranges;
    std::vector<ParameterSample> params;
    Matrix fields;  // node count x sample count, columns are snapshots

    int n_nodes() const { return fields.rows; }
    int n_samples() const { return fields.cols; }
};

/// Solve the FEM instance for every sample and collect the columns in input
/// order. Assembly is shared across samples (it does not depend on the
/// parameters); a failing solve aborts with the offending sample attached.
inline SnapshotSet generate_snapshots(const Mesh& mesh, const std::vector<ParameterSample>& samples,
                                      const SourceTerm& source, const CgOptions& cg = {}) {
    SnapshotSet set;
    set.grid = {mesh.lx, mesh.ly, mesh.nx, mesh.ny};
    set.source_id = source.id;
    set.params = samples;
    set.fields = Matrix(mesh.node_count(), static_cast<int>(samples.size()));

    if (samples.empty()) return set;
    const GalerkinSystem sys = assemble(mesh, source.fn);
    for (int j = 0; j < static_cast<int>(samples.size()); ++j) {
        const ParameterSample& mu = samples[static_cast<std::size_t>(j)];
        try {
            const AssembledSystem constrained =
                impose_dirichlet(sys, mesh, mu.kappa, mu.beta, mu.q_in);
            const FieldVector u = solve(constrained, cg);
            std::copy(u.begin(), u.end(), set.fields.col(j));
        } catch (const std::exception& e) {
            throw Error("generate_snapshots: sample " + std::to_string(j) + " (" +
                        mu.describe() + ") failed: " + e.what());
        }
    }
    return set;
}

inline void save_snapshots(const SnapshotSet& set, const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw Error("save_snapshots: cannot open " + path.string());
    io::write_magic(os, "PODS");
    io::write_u32(os, 1);
    io::write_u64(os, static_cast<std::uint64_t>(set.fields.rows));
    io::write_u64(os, static_cast<std::uint64_t>(set.fields.cols));
    io::write_u64(os, static_cast<std::uint64_t>(set.grid.nx));
    io::write_u64(os, static_cast<std::uint64_t>(set.grid.ny));
    io::write_f64(os, set.grid.lx);
    io::write_f64(os, set.grid.ly);
    io::write_u64(os, set.seed);
    io::write_string(os, set.source_id);
    io::write_f64(os, set.ranges.kappa_min);
    io::write_f64(os, set.ranges.kappa_max);
    io::write_f64(os, set.ranges.beta_min);
    io::write_f64(os, set.ranges.beta_max);
    io::write_f64(os, set.ranges.qin_min);
    io::write_f64(os, set.ranges.qin_max);
    io::write_u8(os, set.ranges.kappa_log_uniform ? 1 : 0);
    io::write_f64_array(os, set.fields.data);
    for (const auto& p : set.params) {
        io::write_f64(os, p.kappa);
        io::write_f64(os, p.beta);
        io::write_f64(os, p.q_in);
    }
    if (!os) throw Error("save_snapshots: write failed for " + path.string());
}

inline SnapshotSet load_snapshots(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw Error("load_snapshots: cannot open " + path.string());
    io::expect_magic(is, "PODS", "snapshot");
    const std::uint32_t version = io::read_u32(is);
    if (version != 1)
        throw Error("load_snapshots: unsupported format version " + std::to_string(version));

    const std::uint64_t n = io::read_u64(is);
    const std::uint64_t n_s = io::read_u64(is);
    if (n > (1u << 26) || n_s > (1u << 26) || (n_s > 0 && n * n_s > (1ull << 32)))
        throw Error("load_snapshots: header dimensions out of range");

    SnapshotSet set;
    const std::uint64_t nx = io::read_u64(is);
    const std::uint64_t ny = io::read_u64(is);
    if (nx < 1 || ny < 1 || nx > (1u << 24) || ny > (1u << 24))
        throw Error("load_snapshots: grid dimensions out of range");
    set.grid.nx = static_cast<int>(nx);
    set.grid.ny = static_cast<int>(ny);
    set.grid.lx = io::read_f64(is);
    set.grid.ly = io::read_f64(is);
    if (static_cast<std::uint64_t>(set.grid.nx + 1) * static_cast<std::uint64_t>(set.grid.ny + 1) != n)
        throw Error("load_snapshots: node count does not match grid dimensions");
    set.seed = io::read_u64(is);
    set.source_id = io::read_string(is);
    set.ranges.kappa_min = io::read_f64(is);
    set.ranges.kappa_max = io::read_f64(is);
    set.ranges.beta_min = io::read_f64(is);
    set.ranges.beta_max = io::read_f64(is);
    set.ranges.qin_min = io::read_f64(is);
    set.ranges.qin_max = io::read_f64(is);
    set.ranges.kappa_log_uniform = io::read_u8(is) != 0;

    set.fields = Matrix(static_cast<int>(n), static_cast<int>(n_s));
    io::read_f64_array(is, set.fields.data, static_cast<std::size_t>(n * n_s));
    set.params.resize(static_cast<std::size_t>(n_s));
    for (auto& p : set.params) {
        p.kappa = io::read_f64(is);
        p.beta = io::read_f64(is);
        p.q_in = io::read_f64(is);
    }
    io::expect_eof(is, "snapshot");
    return set;
}

/// Guard used when artifacts from disk must match the configured mesh.
inline void require_grid_match(const SnapshotSet& set, const Mesh& mesh) {
    if (set.grid.nx != mesh.nx || set.grid.ny != mesh.ny || set.n_nodes() != mesh.node_count())
        throw Error("snapshots: stored grid " + std::to_string(set.grid.nx) + "x" +
                    std::to_string(set.grid.ny) + " does not match configured mesh " +
                    std::to_string(mesh.nx) + "x" + std::to_string(mesh.ny));
}

inline void write_params_csv(const SnapshotSet& set, std::ostream& os) {
    os << "kappa,beta,qin\n";
    for (const auto& p : set.params)
        os << io::full_precision(p.kappa) << ',' << io::full_precision(p.beta) << ','
           << io::full_precision(p.q_in) << '\n';
}

}  // namespace podsur
