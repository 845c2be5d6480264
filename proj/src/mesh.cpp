#include "stochdom/mesh.hpp"

#include "stochdom/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>
#include <tuple>
#include <unordered_map>

namespace stochdom {

namespace {

std::uint64_t edge_key(int a, int b)
{
    const auto lo = static_cast<std::uint64_t>(std::min(a, b));
    const auto hi = static_cast<std::uint64_t>(std::max(a, b));
    return (hi << 32) | lo;
}

std::array<double, 3> interior_angles(const std::array<Vec2, 3>& c)
{
    std::array<double, 3> out{};
    for (int k = 0; k < 3; ++k) {
        const Vec2 u = c[(k + 1) % 3] - c[k];
        const Vec2 v = c[(k + 2) % 3] - c[k];
        out[k] = std::atan2(std::abs(cross(u, v)), dot(u, v)) * 180.0 / M_PI;
    }
    return out;
}

} // namespace

double TriMesh::area(int k) const
{
    const auto c = corners(k);
    return 0.5 * orient(c[0], c[1], c[2]);
}

double TriMesh::total_area() const
{
    double a = 0.0;
    for (int k = 0; k < num_triangles(); ++k) {
        a += area(k);
    }
    return a;
}

EdgeTopology build_edge_topology(const TriMesh& mesh)
{
    EdgeTopology topo;
    std::unordered_map<std::uint64_t, int> index;
    index.reserve(3 * mesh.triangles.size());
    topo.triangle_edges.resize(mesh.triangles.size());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        for (int k = 0; k < 3; ++k) {
            const int a = tri[k];
            const int b = tri[(k + 1) % 3];
            auto [it, inserted] = index.try_emplace(edge_key(a, b), static_cast<int>(topo.edges.size()));
            if (inserted) {
                topo.edges.push_back({std::min(a, b), std::max(a, b)});
                topo.edge_triangles.push_back({t, -1});
            } else {
                auto& owners = topo.edge_triangles[it->second];
                if (owners[1] != -1) {
                    throw InputError("edge (" + std::to_string(a) + ", " + std::to_string(b)
                                     + ") is shared by more than two triangles");
                }
                owners[1] = t;
            }
            topo.triangle_edges[t][k] = it->second;
        }
    }
    return topo;
}

void TriMesh::finalize()
{
    edges.clear();
    const auto topo = build_edge_topology(*this);
    for (std::size_t e = 0; e < topo.edges.size(); ++e) {
        int t0 = topo.edge_triangles[e][0];
        int t1 = topo.edge_triangles[e][1];
        if (t1 >= 0 && tags[t0] == tags[t1]) {
            continue;
        }
        if (t1 >= 0 && tags[t1] < tags[t0]) {
            std::swap(t0, t1);
        }
        // Store the edge in tri0's counter-clockwise direction.
        const auto& tri = triangles[t0];
        int local = 0;
        for (int k = 0; k < 3; ++k) {
            if (topo.triangle_edges[t0][k] == static_cast<int>(e)) {
                local = k;
            }
        }
        MeshEdge me;
        me.a = tri[local];
        me.b = tri[(local + 1) % 3];
        me.flag = t1 < 0 ? EdgeFlag::Dirichlet : EdgeFlag::Interface;
        me.tri0 = t0;
        me.tri1 = t1;
        edges.push_back(me);
    }
}

TriMesh mesh_from_partition(const Partition& partition)
{
    TriMesh m;
    m.vertices = partition.nodes;
    m.triangles = partition.triangles;
    m.tags.resize(partition.size());
    std::iota(m.tags.begin(), m.tags.end(), 0);
    m.generation.assign(partition.size(), 0);
    m.num_subdomains = partition.size();
    m.finalize();
    return m;
}

TriMesh refine(const TriMesh& mesh, const MarkSet& marks)
{
    if (marks.empty()) {
        return mesh;
    }
    for (int k : marks) {
        if (k < 0 || k >= mesh.num_triangles()) {
            throw InputError("mark index " + std::to_string(k) + " out of range");
        }
    }
    const auto topo = build_edge_topology(mesh);
    const int num_edges = static_cast<int>(topo.edges.size());
    std::vector<char> marked(num_edges, 0);
    for (int k : marks) {
        marked[topo.triangle_edges[k][0]] = 1;
    }

    bool changed = true;
    int rounds = 0;
    while (changed) {
        if (++rounds > num_edges + 1) {
            throw RefinementError("conforming closure did not terminate");
        }
        changed = false;
        for (int t = 0; t < mesh.num_triangles(); ++t) {
            const auto& te = topo.triangle_edges[t];
            if (!marked[te[0]] && (marked[te[1]] || marked[te[2]])) {
                marked[te[0]] = 1;
                changed = true;
            }
        }
    }

    std::unordered_map<std::uint64_t, int> edge_index;
    edge_index.reserve(topo.edges.size());
    for (int e = 0; e < num_edges; ++e) {
        edge_index.emplace(edge_key(topo.edges[e][0], topo.edges[e][1]), e);
    }
    std::vector<int> midpoint(num_edges, -1);

    TriMesh out;
    out.vertices = mesh.vertices;
    out.num_subdomains = mesh.num_subdomains;
    out.triangles.reserve(2 * mesh.triangles.size());

    auto marked_edge = [&](int a, int b) -> int {
        const auto it = edge_index.find(edge_key(a, b));
        return (it != edge_index.end() && marked[it->second]) ? it->second : -1;
    };
    auto bisect = [&](auto&& self, const std::array<int, 3>& t, int tag, int gen) -> void {
        const int e = marked_edge(t[0], t[1]);
        if (e < 0) {
            out.triangles.push_back(t);
            out.tags.push_back(tag);
            out.generation.push_back(gen);
            return;
        }
        if (midpoint[e] < 0) {
            midpoint[e] = static_cast<int>(out.vertices.size());
            out.vertices.push_back(0.5 * (mesh.vertices[t[0]] + mesh.vertices[t[1]]));
        }
        const int m = midpoint[e];
        self(self, {t[2], t[0], m}, tag, gen + 1);
        self(self, {t[1], t[2], m}, tag, gen + 1);
    };
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        bisect(bisect, mesh.triangles[t], mesh.tags[t], mesh.generation[t]);
    }
    out.finalize();
    return out;
}

TriMesh bisect_all(const TriMesh& mesh, int bisections)
{
    TriMesh m = mesh;
    for (int i = 0; i < bisections; ++i) {
        MarkSet all(m.num_triangles());
        std::iota(all.begin(), all.end(), 0);
        m = refine(m, all);
    }
    return m;
}

TriMesh uniform_mesh(const Partition& partition, double h_tilde, int base_levels, std::string* warning)
{
    if (!(h_tilde > 0.0 && h_tilde <= 1.0)) {
        throw InputError("h_tilde must lie in (0, 1]");
    }
    if (base_levels < 0) {
        throw InputError("base_levels must be non-negative");
    }
    const int k = std::max(0, static_cast<int>(std::ceil(-std::log2(h_tilde) - 1e-9)));
    if (std::ldexp(1.0, -k) != h_tilde && warning) {
        char buf[128];
        std::snprintf(buf, sizeof buf, "h_tilde %.17g is not a power of 1/2; rounded down to %.17g", h_tilde,
                      std::ldexp(1.0, -k));
        *warning = buf;
    }
    return bisect_all(mesh_from_partition(partition), 2 * (base_levels + k));
}

double max_angle(const TriMesh& mesh)
{
    double worst = 0.0;
    for (int k = 0; k < mesh.num_triangles(); ++k) {
        const auto a = interior_angles(mesh.corners(k));
        worst = std::max({worst, a[0], a[1], a[2]});
    }
    return worst;
}

double min_angle(const TriMesh& mesh)
{
    double best = 180.0;
    for (int k = 0; k < mesh.num_triangles(); ++k) {
        const auto a = interior_angles(mesh.corners(k));
        best = std::min({best, a[0], a[1], a[2]});
    }
    return best;
}

ConformityReport check_conformity(const TriMesh& mesh, const Partition* partition)
{
    ConformityReport rep;
    auto fail = [&rep](const std::string& why) {
        rep.ok = false;
        rep.message = why;
        return rep;
    };
    if (mesh.tags.size() != mesh.triangles.size()) {
        return fail("tag count differs from triangle count");
    }
    std::vector<char> used(mesh.vertices.size(), 0);
    for (int k = 0; k < mesh.num_triangles(); ++k) {
        for (int v : mesh.triangles[k]) {
            if (v < 0 || v >= mesh.num_vertices()) {
                return fail("triangle " + std::to_string(k) + " has an invalid vertex index");
            }
            used[v] = 1;
        }
        if (mesh.area(k) <= 0.0) {
            return fail("triangle " + std::to_string(k) + " is not positively oriented");
        }
    }
    if (std::find(used.begin(), used.end(), 0) != used.end()) {
        return fail("mesh has unused vertices");
    }
    EdgeTopology topo;
    try {
        topo = build_edge_topology(mesh);
    } catch (const InputError& e) {
        return fail(e.what());
    }
    // Interior edges must be traversed in opposite directions by their two triangles.
    for (std::size_t e = 0; e < topo.edges.size(); ++e) {
        const auto [t0, t1] = topo.edge_triangles[e];
        if (t1 < 0) {
            continue;
        }
        auto direction = [&](int t) {
            for (int k = 0; k < 3; ++k) {
                if (topo.triangle_edges[t][k] == static_cast<int>(e)) {
                    return mesh.triangles[t][k] < mesh.triangles[t][(k + 1) % 3];
                }
            }
            return false;
        };
        if (direction(t0) == direction(t1)) {
            return fail("edge " + std::to_string(e) + " is traversed in the same direction twice");
        }
    }
    const long long euler = static_cast<long long>(mesh.vertices.size()) - static_cast<long long>(topo.edges.size())
                            + static_cast<long long>(mesh.triangles.size());
    if (euler != 1) {
        return fail("Euler characteristic is " + std::to_string(euler) + " (hanging nodes or holes)");
    }
    if (partition) {
        for (int k = 0; k < mesh.num_triangles(); ++k) {
            const int d = mesh.tags[k];
            if (d < 0 || d >= partition->size()) {
                return fail("triangle " + std::to_string(k) + " has an invalid tag");
            }
            const auto s = partition->corners(d);
            const double area2 = orient(s[0], s[1], s[2]);
            for (const Vec2& v : mesh.corners(k)) {
                const double tol = -1e-10 * area2;
                if (orient(s[0], s[1], v) < tol || orient(s[1], s[2], v) < tol || orient(s[2], s[0], v) < tol) {
                    return fail("triangle " + std::to_string(k) + " leaves subdomain " + std::to_string(d));
                }
            }
        }
    }
    return rep;
}

double IndicatorField::total() const { return std::accumulate(values.begin(), values.end(), 0.0); }

MarkSet dorfler_mark(const IndicatorField& indicators, double fraction)
{
    if (!(fraction > 0.0 && fraction <= 1.0)) {
        throw InputError("dorfler fraction must lie in (0, 1]");
    }
    std::vector<int> order(indicators.values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](int i, int j) { return indicators.values[i] > indicators.values[j]; });
    double total = 0.0;
    for (int k : order) {
        total += indicators.values[k];
    }
    MarkSet marks;
    if (!(total > 0.0)) {
        return marks;
    }
    const double target = fraction * total;
    double sum = 0.0;
    for (int k : order) {
        if (sum >= target) {
            break;
        }
        sum += indicators.values[k];
        marks.push_back(k);
    }
    return marks;
}

void write_mesh(std::ostream& out, const TriMesh& mesh)
{
    char buf[96];
    out << mesh.num_vertices() << ' ' << mesh.num_triangles() << ' ' << mesh.edges.size() << '\n';
    for (const auto& v : mesh.vertices) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g\n", v.x, v.y);
        out << buf;
    }
    for (int k = 0; k < mesh.num_triangles(); ++k) {
        const auto& t = mesh.triangles[k];
        out << t[0] << ' ' << t[1] << ' ' << t[2] << ' ' << mesh.tags[k] << '\n';
    }
    for (const auto& e : mesh.edges) {
        out << e.a << ' ' << e.b << ' ' << static_cast<int>(e.flag) << '\n';
    }
}

TriMesh read_mesh(std::istream& in)
{
    long long nv = 0, nt = 0, ne = 0;
    if (!(in >> nv >> nt >> ne) || nv < 3 || nt < 1 || ne < 0) {
        throw InputError("mesh file: malformed header");
    }
    TriMesh m;
    m.vertices.resize(nv);
    for (auto& v : m.vertices) {
        if (!(in >> v.x >> v.y)) {
            throw InputError("mesh file: truncated vertex block");
        }
    }
    m.triangles.resize(nt);
    m.tags.resize(nt);
    m.generation.assign(nt, 0);
    for (long long k = 0; k < nt; ++k) {
        auto& t = m.triangles[k];
        if (!(in >> t[0] >> t[1] >> t[2] >> m.tags[k])) {
            throw InputError("mesh file: truncated triangle block");
        }
        for (int v : t) {
            if (v < 0 || v >= nv) {
                throw InputError("mesh file: triangle " + std::to_string(k) + " references vertex " + std::to_string(v));
            }
        }
        if (m.tags[k] < 0) {
            throw InputError("mesh file: negative subdomain tag");
        }
        m.num_subdomains = std::max(m.num_subdomains, m.tags[k] + 1);
    }
    std::set<std::tuple<std::uint64_t, int>> listed;
    for (long long k = 0; k < ne; ++k) {
        int a = 0, b = 0, flag = 0;
        if (!(in >> a >> b >> flag)) {
            throw InputError("mesh file: truncated edge block");
        }
        if (flag != 1 && flag != 2) {
            throw InputError("mesh file: edge flag must be 1 or 2");
        }
        listed.insert({edge_key(a, b), flag});
    }
    m.finalize();
    std::set<std::tuple<std::uint64_t, int>> derived;
    for (const auto& e : m.edges) {
        derived.insert({edge_key(e.a, e.b), static_cast<int>(e.flag)});
    }
    if (listed != derived) {
        throw InputError("mesh file: edge list disagrees with the triangle topology");
    }
    return m;
}

} // namespace stochdom
