#pragma once

#include "stochdom/geometry.hpp"

#include <array>
#include <iosfwd>
#include <string>
#include <vector>

namespace stochdom {

enum class EdgeFlag : int { Dirichlet = 1, Interface = 2 };

/// A flagged edge. For interface edges tri0 carries the smaller subdomain tag;
/// boundary edges have tri1 = -1.
struct MeshEdge {
    int a = 0;
    int b = 0;
    EdgeFlag flag = EdgeFlag::Dirichlet;
    int tri0 = -1;
    int tri1 = -1;
};

/// Conforming triangulation refining a partition. Triangles are
/// counter-clockwise; (v0, v1) is the refinement edge and v2 the newest vertex.
struct TriMesh {
    std::vector<Vec2> vertices;
    std::vector<std::array<int, 3>> triangles;
    std::vector<int> tags;
    std::vector<int> generation;
    /// Boundary and interface edges only, recomputed by finalize().
    std::vector<MeshEdge> edges;
    int num_subdomains = 0;

    int num_vertices() const { return static_cast<int>(vertices.size()); }
    int num_triangles() const { return static_cast<int>(triangles.size()); }
    std::array<Vec2, 3> corners(int k) const
    {
        const auto& t = triangles[k];
        return {vertices[t[0]], vertices[t[1]], vertices[t[2]]};
    }
    double area(int k) const;
    double total_area() const;

    /// Rebuilds the flagged edge list from the triangles.
    void finalize();
};

/// Every edge of the mesh, numbered in first-visit order over the triangles.
struct EdgeTopology {
    std::vector<std::array<int, 2>> edges;
    /// Local edge k of triangle t joins t[k] and t[(k + 1) % 3].
    std::vector<std::array<int, 3>> triangle_edges;
    std::vector<std::array<int, 2>> edge_triangles;
};

EdgeTopology build_edge_topology(const TriMesh& mesh);

TriMesh mesh_from_partition(const Partition& partition);

/// h_tilde = 2^-k gives k uniform sweeps (two bisections each) on top of
/// `base_levels` sweeps of the partition. Other h_tilde values are rounded down
/// to a power of two and reported through `warning`.
TriMesh uniform_mesh(const Partition& partition, double h_tilde, int base_levels = 0,
                     std::string* warning = nullptr);

/// Largest interior angle over all triangles, in degrees.
double max_angle(const TriMesh& mesh);
double min_angle(const TriMesh& mesh);

using MarkSet = std::vector<int>;

/// Newest-vertex bisection of the marked triangles plus conforming closure.
TriMesh refine(const TriMesh& mesh, const MarkSet& marks);
/// One bisection of every triangle, repeated `bisections` times.
TriMesh bisect_all(const TriMesh& mesh, int bisections);

struct ConformityReport {
    bool ok = true;
    std::string message;
};

/// Edge multiplicity, orientation, Euler characteristic (V - E + T = 1) and tag checks.
ConformityReport check_conformity(const TriMesh& mesh, const Partition* partition = nullptr);

struct IndicatorField {
    std::vector<double> values;
    std::vector<double> signed_values;

    int size() const { return static_cast<int>(values.size()); }
    double total() const;
};

/// Minimal prefix of triangles by descending E_K (ties by index) carrying
/// `fraction` of the total, in selection order.
MarkSet dorfler_mark(const IndicatorField& indicators, double fraction);

void write_mesh(std::ostream& out, const TriMesh& mesh);
TriMesh read_mesh(std::istream& in);

} // namespace stochdom
