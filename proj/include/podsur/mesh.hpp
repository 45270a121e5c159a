// Structured triangulation of a rectangle. Each grid cell is split along the
// lower-left to upper-right diagonal into two counter-clockwise triangles;
// boundary nodes are classified as inflow (x = 0) or wall (remaining edges).
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <stdexcept>
#include <string>
#include <vector>

#include "podsur/io.hpp"

namespace podsur {

enum class NodeClass : std::uint8_t { interior = 0, inflow = 1, wall = 2 };

/// Who owns the two corners shared by the inflow edge and the walls.
enum class CornerPolicy { inflow_wins, wall_wins };

struct Node {
    double x = 0.0;
    double y = 0.0;
};

struct Mesh {
    double lx = 0.0;
    double ly = 0.0;
    int nx = 0;  // cells in x
    int ny = 0;  // cells in y
    std::vector<Node> nodes;                    // (nx+1)*(ny+1), x fastest
    std::vector<std::array<int, 3>> triangles;  // 2*nx*ny, CCW
    std::vector<NodeClass> node_class;

    int node_count() const { return (nx + 1) * (ny + 1); }
    int triangle_count() const { return 2 * nx * ny; }
    int node_index(int ix, int iy) const { return iy * (nx + 1) + ix; }
};

/// Per-node labels recomputed from coordinates alone; idempotent.
inline std::vector<NodeClass> classify_boundary(const Mesh& mesh,
                                                CornerPolicy policy = CornerPolicy::inflow_wins) {
    std::vector<NodeClass> cls(mesh.nodes.size(), NodeClass::interior);
    for (std::size_t i = 0; i < mesh.nodes.size(); ++i) {
        const auto& n = mesh.nodes[i];
        const bool left = n.x == 0.0;
        const bool other = n.x == mesh.lx || n.y == 0.0 || n.y == mesh.ly;
        if (policy == CornerPolicy::inflow_wins) {
            if (left)
                cls[i] = NodeClass::inflow;
            else if (other)
                cls[i] = NodeClass::wall;
        } else {
            if (other)
                cls[i] = NodeClass::wall;
            else if (left)
                cls[i] = NodeClass::inflow;
        }
    }
    return cls;
}

inline Mesh build_structured_mesh(double lx, double ly, int nx, int ny,
                                  CornerPolicy policy = CornerPolicy::inflow_wins) {
    if (!(lx > 0.0) || !(ly > 0.0) || !std::isfinite(lx) || !std::isfinite(ly))
        throw std::invalid_argument("build_structured_mesh: domain lengths must be positive");
    if (nx < 1 || ny < 1)
        throw std::invalid_argument("build_structured_mesh: cell counts must be at least 1");

    Mesh mesh;
    mesh.lx = lx;
    mesh.ly = ly;
    mesh.nx = nx;
    mesh.ny = ny;
    mesh.nodes.reserve(static_cast<std::size_t>(mesh.node_count()));
    for (int iy = 0; iy <= ny; ++iy) {
        const double y = (iy == ny) ? ly : ly * iy / ny;
        for (int ix = 0; ix <= nx; ++ix) {
            const double x = (ix == nx) ? lx : lx * ix / nx;
            mesh.nodes.push_back({x, y});
        }
    }

    mesh.triangles.reserve(static_cast<std::size_t>(mesh.triangle_count()));
    for (int iy = 0; iy < ny; ++iy) {
        for (int ix = 0; ix < nx; ++ix) {
            const int a = mesh.node_index(ix, iy);
            const int b = mesh.node_index(ix + 1, iy);
            const int c = mesh.node_index(ix + 1, iy + 1);
            const int d = mesh.node_index(ix, iy + 1);
            mesh.triangles.push_back({a, b, c});
            mesh.triangles.push_back({a, c, d});
        }
    }

    mesh.node_class = classify_boundary(mesh, policy);
    return mesh;
}

struct ElementGeometry {
    double area = 0.0;
    std::array<std::array<double, 2>, 3> grad{};  // constant P1 basis gradients
};

inline ElementGeometry element_geometry(const Mesh& mesh, int t) {
    if (t < 0 || t >= static_cast<int>(mesh.triangles.size()))
        throw std::invalid_argument("element_geometry: triangle index out of range");
    const auto& tri = mesh.triangles[t];
    const Node& p0 = mesh.nodes[tri[0]];
    const Node& p1 = mesh.nodes[tri[1]];
    const Node& p2 = mesh.nodes[tri[2]];

    const double two_a = (p1.x - p0.x) * (p2.y - p0.y) - (p2.x - p0.x) * (p1.y - p0.y);
    if (!(two_a > 0.0))
        throw Error("element_geometry: degenerate or inverted triangle " + std::to_string(t));

    ElementGeometry g;
    g.area = 0.5 * two_a;
    g.grad[0] = {(p1.y - p2.y) / two_a, (p2.x - p1.x) / two_a};
    g.grad[1] = {(p2.y - p0.y) / two_a, (p0.x - p2.x) / two_a};
    g.grad[2] = {(p0.y - p1.y) / two_a, (p1.x - p0.x) / two_a};
    return g;
}

/// Debug listing: one node per line "x y", then one triangle per line
/// "i j k" (0-based).
inline void export_mesh_text(const Mesh& mesh, std::ostream& os) {
    for (const auto& n : mesh.nodes)
        os << io::full_precision(n.x) << ' ' << io::full_precision(n.y) << '\n';
    for (const auto& t : mesh.triangles)
        os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

inline const char* node_class_name(NodeClass c) {
    switch (c) {
        case NodeClass::interior: return "interior";
        case NodeClass::inflow: return "inflow";
        case NodeClass::wall: return "wall";
    }
    return "?";
}

}  // namespace podsur
