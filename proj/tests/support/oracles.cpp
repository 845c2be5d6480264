#include "oracles.hpp"

#include <Eigen/Sparse>

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

namespace oracle {

using stochdom::Mat2;

namespace {

std::array<double, 3> barycentric(const Vec2& p, const Vec2& a, const Vec2& b, const Vec2& c)
{
    const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    const double l1 = ((p.x - a.x) * (c.y - a.y) - (c.x - a.x) * (p.y - a.y)) / det;
    const double l2 = ((b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y)) / det;
    return {1.0 - l1 - l2, l1, l2};
}

/// Gradients of the three hat functions and the signed area.
std::array<Vec2, 3> hat_gradients(const Vec2& a, const Vec2& b, const Vec2& c, double& area)
{
    const double det = (b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y);
    area = 0.5 * det;
    return {Vec2{(b.y - c.y) / det, (c.x - b.x) / det}, Vec2{(c.y - a.y) / det, (a.x - c.x) / det},
            Vec2{(a.y - b.y) / det, (b.x - a.x) / det}};
}

} // namespace

std::vector<std::pair<double, double>> gauss_legendre01(int n)
{
    std::vector<std::pair<double, double>> out;
    for (int i = 1; i <= n; ++i) {
        double x = std::cos(M_PI * (i - 0.25) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            if (n == 1) p0 = 1.0;
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            const double dx = p1 / dp;
            x -= dx;
            if (std::abs(dx) < 1e-16) break;
        }
        out.push_back({0.5 * (1.0 - x), 1.0 / ((1.0 - x * x) * dp * dp)});
    }
    return out;
}

std::vector<QuadPoint> collapsed_gauss(int n)
{
    const auto g = gauss_legendre01(n);
    std::vector<QuadPoint> r;
    for (const auto& [u, wu] : g) {
        for (const auto& [v, wv] : g) {
            // (u, v) in the unit square -> (x, y) = (u, v(1-u)) in the triangle.
            const double x = u, y = v * (1.0 - u);
            r.push_back({1.0 - x - y, x, y, 2.0 * wu * wv * (1.0 - u)});
        }
    }
    return r;
}

const std::vector<QuadPoint>& six_point_rule()
{
    static const std::vector<QuadPoint> rule = [] {
        const double a1 = 0.445948490915965, b1 = 1.0 - 2.0 * a1, w1 = 0.223381589678011;
        const double a2 = 0.091576213509771, b2 = 1.0 - 2.0 * a2, w2 = 0.109951743655322;
        return std::vector<QuadPoint>{{b1, a1, a1, w1}, {a1, b1, a1, w1}, {a1, a1, b1, w1},
                                      {b2, a2, a2, w2}, {a2, b2, a2, w2}, {a2, a2, b2, w2}};
    }();
    return rule;
}

std::vector<Vec2> physical_vertices(const stochdom::TriMesh& mesh, const stochdom::Partition& partition,
                                    const stochdom::BoundarySample& sample)
{
    std::vector<Vec2> moved = partition.nodes;
    for (std::size_t i = 0; i < moved.size(); ++i) {
        const int j = partition.boundary_index[i];
        if (j >= 0) moved[i] += sample.displacements[j];
    }
    std::vector<int> owner(mesh.vertices.size(), -1);
    for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
        for (int v : mesh.triangles[t]) {
            if (owner[v] < 0) owner[v] = mesh.tags[t];
        }
    }
    std::vector<Vec2> out(mesh.vertices.size());
    for (std::size_t v = 0; v < out.size(); ++v) {
        const auto& tri = partition.triangles[owner[v]];
        const auto l = barycentric(mesh.vertices[v], partition.nodes[tri[0]], partition.nodes[tri[1]],
                                   partition.nodes[tri[2]]);
        out[v] = l[0] * moved[tri[0]] + l[1] * moved[tri[1]] + l[2] * moved[tri[2]];
    }
    return out;
}

PhysicalSolve physical_p1_solve(const std::vector<Vec2>& x, const std::vector<std::array<int, 3>>& tris,
                                const stochdom::ProblemData& data)
{
    const int n = static_cast<int>(x.size());
    std::map<std::pair<int, int>, int> edge_count;
    for (const auto& t : tris) {
        for (int k = 0; k < 3; ++k) {
            const int a = t[k], b = t[(k + 1) % 3];
            ++edge_count[{std::min(a, b), std::max(a, b)}];
        }
    }
    std::vector<char> boundary(n, 0);
    for (const auto& [e, c] : edge_count) {
        if (c == 1) boundary[e.first] = boundary[e.second] = 1;
    }
    std::vector<int> index(n, -1);
    int m = 0;
    for (int v = 0; v < n; ++v) {
        if (!boundary[v]) index[v] = m++;
    }

    std::vector<Eigen::Triplet<double>> trip;
    Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
    for (const auto& t : tris) {
        double area = 0.0;
        const auto g = hat_gradients(x[t[0]], x[t[1]], x[t[2]], area);
        double ke[3][3] = {};
        double fe[3] = {};
        for (const auto& q : six_point_rule()) {
            const double l[3] = {q.l0, q.l1, q.l2};
            const Vec2 p = l[0] * x[t[0]] + l[1] * x[t[1]] + l[2] * x[t[2]];
            const Mat2 a = data.diffusion(p);
            const Vec2 b = data.has_convection ? data.convection(p) : Vec2{};
            const double f = data.source(p);
            const double w = q.weight * area;
            for (int i = 0; i < 3; ++i) {
                fe[i] += w * f * l[i];
                for (int j = 0; j < 3; ++j) {
                    const Vec2 ag{a.a11 * g[j].x + a.a12 * g[j].y, a.a21 * g[j].x + a.a22 * g[j].y};
                    ke[i][j] += w * (ag.x * g[i].x + ag.y * g[i].y + (b.x * g[j].x + b.y * g[j].y) * l[i]);
                }
            }
        }
        for (int i = 0; i < 3; ++i) {
            if (index[t[i]] < 0) continue;
            rhs[index[t[i]]] += fe[i];
            for (int j = 0; j < 3; ++j) {
                if (index[t[j]] >= 0) trip.emplace_back(index[t[i]], index[t[j]], ke[i][j]);
            }
        }
    }
    Eigen::SparseMatrix<double> k(m, m);
    k.setFromTriplets(trip.begin(), trip.end());
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(k);
    if (lu.info() != Eigen::Success) throw std::runtime_error("oracle factorization failed");
    const Eigen::VectorXd sol = lu.solve(rhs);

    PhysicalSolve out;
    out.u.assign(n, 0.0);
    for (int v = 0; v < n; ++v) {
        if (index[v] >= 0) out.u[v] = sol[index[v]];
    }
    long double qoi = 0.0L;
    for (const auto& t : tris) {
        double area = 0.0;
        hat_gradients(x[t[0]], x[t[1]], x[t[2]], area);
        for (const auto& q : six_point_rule()) {
            const Vec2 p = q.l0 * x[t[0]] + q.l1 * x[t[1]] + q.l2 * x[t[2]];
            const double u = q.l0 * out.u[t[0]] + q.l1 * out.u[t[1]] + q.l2 * out.u[t[2]];
            qoi += q.weight * area * u * data.qoi_weight(p);
        }
    }
    out.qoi = static_cast<double>(qoi);
    return out;
}

Norms field_error(const stochdom::Field& field, const std::function<double(const Vec2&)>& exact,
                  const std::function<Vec2(const Vec2&)>& exact_gradient, int order)
{
    const auto rule = collapsed_gauss(order);
    const auto& mesh = field.space->mesh();
    long double l2 = 0.0L, h1 = 0.0L;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Vec2 a = mesh.vertices[tri[0]], b = mesh.vertices[tri[1]], c = mesh.vertices[tri[2]];
        const double area = 0.5 * std::abs((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
        for (const auto& q : rule) {
            const std::array<double, 3> l{q.l0, q.l1, q.l2};
            const Vec2 p = l[0] * a + l[1] * b + l[2] * c;
            const double du = field.value(t, l) - exact(p);
            const Vec2 dg = field.gradient(t, l) - exact_gradient(p);
            l2 += q.weight * area * du * du;
            h1 += q.weight * area * (dg.x * dg.x + dg.y * dg.y);
        }
    }
    return {std::sqrt(static_cast<double>(l2)), std::sqrt(static_cast<double>(h1))};
}

double lions_single_expression(const stochdom::LionsSolver& solver, const stochdom::LionsIterate& it,
                               const stochdom::Field& adjoint)
{
    const auto& mesh = solver.mesh();
    const auto& coeffs = solver.coeffs();
    auto local_values = [&](int t) {
        const int d = mesh.tags[t];
        const auto& sd = solver.subdomain(d);
        std::array<double, 3> u{};
        for (int k = 0; k < 3; ++k) {
            const int gv = mesh.triangles[t][k];
            const auto pos = std::lower_bound(sd.vertices.begin(), sd.vertices.end(), gv) - sd.vertices.begin();
            u[k] = it.u[d][pos];
        }
        return u;
    };

    long double s = 0.0L;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& tri = mesh.triangles[t];
        const Vec2 a = mesh.vertices[tri[0]], b = mesh.vertices[tri[1]], c = mesh.vertices[tri[2]];
        double area = 0.0;
        const auto g = hat_gradients(a, b, c, area);
        const auto u = local_values(t);
        const Vec2 gu = u[0] * g[0] + u[1] * g[1] + u[2] * g[2];
        for (const auto& q : six_point_rule()) {
            const std::array<double, 3> l{q.l0, q.l1, q.l2};
            const Vec2 p = l[0] * a + l[1] * b + l[2] * c;
            const Mat2 am = coeffs.diffusion(mesh.tags[t], p);
            const Vec2 agu{am.a11 * gu.x + am.a12 * gu.y, am.a21 * gu.x + am.a22 * gu.y};
            const Vec2 ge = adjoint.gradient(t, l);
            s += q.weight * area * (coeffs.source(mesh.tags[t], p) * adjoint.value(t, l) - (agu.x * ge.x + agu.y * ge.y));
        }
    }

    const auto gl = gauss_legendre01(3);
    for (int e : solver.interface_edges()) {
        const auto& me = mesh.edges[e];
        const Vec2 pa = mesh.vertices[me.a], pb = mesh.vertices[me.b];
        const Vec2 tv = pb - pa;
        const double len = std::hypot(tv.x, tv.y);
        const Vec2 n0{tv.y / len, -tv.x / len};
        const int sides[2] = {me.tri0, me.tri1};
        for (const auto& [sq, wq] : gl) {
            const Vec2 p = (1.0 - sq) * pa + sq * pb;
            Vec2 avg{};
            double trace[2] = {};
            for (int side = 0; side < 2; ++side) {
                const int t = sides[side];
                const auto& tri = mesh.triangles[t];
                const auto l = barycentric(p, mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
                const auto u = local_values(t);
                trace[side] = l[0] * u[0] + l[1] * u[1] + l[2] * u[2];
                const Mat2 am = coeffs.diffusion(mesh.tags[t], p);
                const Vec2 ge = adjoint.gradient(t, l);
                avg += 0.5 * Vec2{am.a11 * ge.x + am.a12 * ge.y, am.a21 * ge.x + am.a22 * ge.y};
            }
            s += wq * len * (n0.x * avg.x + n0.y * avg.y) * (trace[0] - trace[1]);
        }
    }
    return static_cast<double>(s);
}

std::uint64_t SplitMix::next()
{
    std::uint64_t z = (s_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

double SplitMix::uniform(double lo, double hi)
{
    return lo + (hi - lo) * static_cast<double>(next() >> 11) * 0x1.0p-53;
}

int SplitMix::integer(int lo, int hi_inclusive)
{
    return lo + static_cast<int>(next() % static_cast<std::uint64_t>(hi_inclusive - lo + 1));
}

} // namespace oracle
