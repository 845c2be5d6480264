#include "stochdom/lions.hpp"

#include "stochdom/error.hpp"
#include "stochdom/estimate.hpp"
#include "stochdom/quadrature.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>

namespace stochdom {

struct LionsSolver::Local {
    std::vector<int> free_index;
    int num_free = 0;
    CsrMatrix stiffness;
    std::vector<double> load;
    std::unique_ptr<SparseFactorization> lu;
};

namespace {

std::array<double, 3> edge_bary(const std::array<int, 3>& tri, int a, int b, double s)
{
    std::array<double, 3> l{0.0, 0.0, 0.0};
    for (int k = 0; k < 3; ++k) {
        if (tri[k] == a) l[k] = 1.0 - s;
        if (tri[k] == b) l[k] = s;
    }
    return l;
}

} // namespace

int LionsSubdomain::local(int global_vertex) const
{
    const auto it = std::lower_bound(vertices.begin(), vertices.end(), global_vertex);
    return (it != vertices.end() && *it == global_vertex) ? static_cast<int>(it - vertices.begin()) : -1;
}

LionsSolver::LionsSolver(std::shared_ptr<const TriMesh> mesh, std::shared_ptr<const TransformedCoefficients> coeffs,
                         LionsConfig config)
    : mesh_(std::move(mesh)), coeffs_(std::move(coeffs)), config_(config)
{
    if (coeffs_->has_convection()) {
        throw InputError("the Lions iteration supports pure diffusion problems only");
    }
    if (!(config_.lambda >= 0.0) || !std::isfinite(config_.lambda)) {
        throw ConfigError("lambda", "must be finite and non-negative");
    }
    if (config_.lambda == 0.0 && !config_.allow_zero_lambda) {
        throw ConfigError("lambda", "lambda = 0 does not converge; set the zero-lambda override to force it");
    }
    if (config_.max_iterations < 0 || config_.record_stride < 1) {
        throw ConfigError("lions", "max_iterations must be >= 0 and record_stride >= 1");
    }

    const TriMesh& m = *mesh_;
    int num_sub = 0;
    for (int tag : m.tags) num_sub = std::max(num_sub, tag + 1);
    subs_.resize(num_sub);
    for (int t = 0; t < m.num_triangles(); ++t) {
        subs_[m.tags[t]].triangles.push_back(t);
    }
    std::vector<char> global_dirichlet(m.num_vertices(), 0);
    for (std::size_t e = 0; e < m.edges.size(); ++e) {
        const auto& me = m.edges[e];
        if (me.flag == EdgeFlag::Dirichlet) {
            global_dirichlet[me.a] = global_dirichlet[me.b] = 1;
        } else {
            interface_.push_back(static_cast<int>(e));
        }
    }
    for (int i = 0; i < static_cast<int>(interface_.size()); ++i) {
        const auto& me = m.edges[interface_[i]];
        subs_[m.tags[me.tri0]].interface_edges.push_back(i);
        subs_[m.tags[me.tri1]].interface_edges.push_back(i);
    }

    for (int d = 0; d < num_sub; ++d) {
        LionsSubdomain& sd = subs_[d];
        for (int t : sd.triangles) {
            for (int v : m.triangles[t]) sd.vertices.push_back(v);
        }
        std::sort(sd.vertices.begin(), sd.vertices.end());
        sd.vertices.erase(std::unique(sd.vertices.begin(), sd.vertices.end()), sd.vertices.end());
        sd.dirichlet.resize(sd.vertices.size());
        bool any_dirichlet = false;
        for (std::size_t k = 0; k < sd.vertices.size(); ++k) {
            sd.dirichlet[k] = global_dirichlet[sd.vertices[k]];
            any_dirichlet = any_dirichlet || sd.dirichlet[k];
        }
        if (config_.lambda == 0.0 && !any_dirichlet) {
            throw ConfigError("lambda", "lambda = 0 leaves subdomain " + std::to_string(d) + " without boundary data");
        }

        auto loc = std::make_unique<Local>();
        const int n = static_cast<int>(sd.vertices.size());
        loc->free_index.assign(n, -1);
        for (int k = 0; k < n; ++k) {
            if (!sd.dirichlet[k]) loc->free_index[k] = loc->num_free++;
        }
        loc->load.assign(n, 0.0);
        std::vector<Triplet> trip;
        for (int t : sd.triangles) {
            const auto c = m.corners(t);
            const auto g = barycentric_gradients(c);
            const double area = 0.5 * orient(c[0], c[1], c[2]);
            std::array<int, 3> lv;
            for (int k = 0; k < 3; ++k) lv[k] = sd.local(m.triangles[t][k]);
            double ke[9] = {};
            double fe[3] = {};
            for (const auto& q : triangle_rule_deg4) {
                const std::array<double, 3> l{q.l0, q.l1, q.l2};
                const Vec2 y = l[0] * c[0] + l[1] * c[1] + l[2] * c[2];
                const Mat2 a = coeffs_->diffusion(d, y);
                const double f = coeffs_->source(d, y);
                const double w = q.weight * area;
                for (int i = 0; i < 3; ++i) {
                    fe[i] += w * f * l[i];
                    for (int j = 0; j < 3; ++j) ke[i * 3 + j] += w * dot(a * g[j], g[i]);
                }
            }
            for (int i = 0; i < 3; ++i) {
                loc->load[lv[i]] += fe[i];
                for (int j = 0; j < 3; ++j) trip.push_back({lv[i], lv[j], ke[i * 3 + j]});
            }
        }
        loc->stiffness = CsrMatrix::from_triplets(n, n, trip);

        for (int i : sd.interface_edges) {
            const auto& me = m.edges[interface_[i]];
            const double len = norm(m.vertices[me.b] - m.vertices[me.a]);
            const int la = sd.local(me.a), lb = sd.local(me.b);
            double mm[4] = {};
            for (const auto& q : gauss3) {
                const double phi[2] = {1.0 - q.s, q.s};
                for (int r = 0; r < 2; ++r)
                    for (int s = 0; s < 2; ++s) mm[r * 2 + s] += config_.lambda * q.weight * len * phi[r] * phi[s];
            }
            const int ids[2] = {la, lb};
            for (int r = 0; r < 2; ++r)
                for (int s = 0; s < 2; ++s) trip.push_back({ids[r], ids[s], mm[r * 2 + s]});
        }
        std::vector<Triplet> free_trip;
        for (const auto& t : trip) {
            const int r = loc->free_index[t.row], c = loc->free_index[t.col];
            if (r >= 0 && c >= 0) free_trip.push_back({r, c, t.value});
        }
        if (loc->num_free > 0) {
            loc->lu = std::make_unique<SparseFactorization>(
                CsrMatrix::from_triplets(loc->num_free, loc->num_free, std::move(free_trip)));
        }
        local_.push_back(std::move(loc));
    }
}

LionsSolver::~LionsSolver() = default;

Vec2 LionsSolver::normal(int edge) const
{
    const auto& me = mesh_->edges[interface_[edge]];
    const Vec2 t = mesh_->vertices[me.b] - mesh_->vertices[me.a];
    return (1.0 / norm(t)) * Vec2{t.y, -t.x};
}

double LionsSolver::value(const LionsIterate& it, int tri, const std::array<double, 3>& bary) const
{
    const int d = mesh_->tags[tri];
    const auto& sd = subs_[d];
    double u = 0.0;
    for (int k = 0; k < 3; ++k) u += bary[k] * it.u[d][sd.local(mesh_->triangles[tri][k])];
    return u;
}

Vec2 LionsSolver::gradient(const LionsIterate& it, int tri) const
{
    const int d = mesh_->tags[tri];
    const auto& sd = subs_[d];
    const auto g = barycentric_gradients(mesh_->corners(tri));
    Vec2 out{};
    for (int k = 0; k < 3; ++k) out += it.u[d][sd.local(mesh_->triangles[tri][k])] * g[k];
    return out;
}

double LionsSolver::trace(const LionsIterate& it, int edge, int side, double s) const
{
    const auto& me = mesh_->edges[interface_[edge]];
    const int d = mesh_->tags[side == 0 ? me.tri0 : me.tri1];
    const auto& sd = subs_[d];
    return (1.0 - s) * it.u[d][sd.local(me.a)] + s * it.u[d][sd.local(me.b)];
}

double LionsSolver::outward_flux(const LionsIterate& it, int edge, int side, int q) const
{
    const auto& me = mesh_->edges[interface_[edge]];
    const int tri = side == 0 ? me.tri0 : me.tri1;
    const Vec2 n = side == 0 ? normal(edge) : -normal(edge);
    const double s = gauss3[q].s;
    const Vec2 y = (1.0 - s) * mesh_->vertices[me.a] + s * mesh_->vertices[me.b];
    return dot(n, coeffs_->diffusion(mesh_->tags[tri], y) * gradient(it, tri));
}

std::array<std::array<double, 3>, 2> LionsSolver::element_data(const LionsIterate& it, int edge) const
{
    std::array<std::array<double, 3>, 2> out;
    const double lam = config_.lambda;
    for (int q = 0; q < 3; ++q) {
        const double s = gauss3[q].s;
        out[0][q] = lam * trace(it, edge, 1, s) - outward_flux(it, edge, 1, q);
        out[1][q] = lam * trace(it, edge, 0, s) - outward_flux(it, edge, 0, q);
    }
    return out;
}

LionsIterate LionsSolver::initial_iterate() const
{
    LionsIterate it;
    it.u.resize(subs_.size());
    for (std::size_t d = 0; d < subs_.size(); ++d) it.u[d].assign(subs_[d].vertices.size(), 0.0);
    it.data0.assign(interface_.size(), {0.0, 0.0, 0.0});
    it.data1.assign(interface_.size(), {0.0, 0.0, 0.0});
    return it;
}

LionsIterate LionsSolver::initial_iterate(const Field& guess) const
{
    if (guess.space->degree() != 1 || guess.space->mesh().num_vertices() != mesh_->num_vertices()) {
        throw InputError("Lions initial guess must be a P1 field on the same mesh");
    }
    LionsIterate it = initial_iterate();
    for (std::size_t d = 0; d < subs_.size(); ++d) {
        for (std::size_t k = 0; k < subs_[d].vertices.size(); ++k) it.u[d][k] = guess.values[subs_[d].vertices[k]];
    }
    if (config_.flux == LionsFlux::Element) {
        for (std::size_t e = 0; e < interface_.size(); ++e) {
            const auto data = element_data(it, static_cast<int>(e));
            it.data0[e] = data[0];
            it.data1[e] = data[1];
        }
        return it;
    }

    // Recover an edge-wise flux h (outward for the tri0 side, antisymmetric across
    // the edge) whose moments reproduce each subdomain's discrete residual
    // R_d = K_d U_d - F_d at every free interface vertex.
    const TriMesh& m = *mesh_;
    std::vector<std::vector<double>> residual(subs_.size());
    for (std::size_t d = 0; d < subs_.size(); ++d) {
        residual[d] = local_[d]->stiffness * it.u[d];
        for (std::size_t k = 0; k < residual[d].size(); ++k) residual[d][k] -= local_[d]->load[k];
    }
    std::map<int, std::vector<int>> edges_at;
    for (std::size_t e = 0; e < interface_.size(); ++e) {
        const auto& me = m.edges[interface_[e]];
        edges_at[me.a].push_back(static_cast<int>(e));
        edges_at[me.b].push_back(static_cast<int>(e));
    }
    // moment[e] = {<h_e, φ_a>, <h_e, φ_b>}
    std::vector<std::array<double, 2>> moment(interface_.size(), {0.0, 0.0});
    for (const auto& [p, edges] : edges_at) {
        const int d0 = m.tags[m.edges[interface_[edges[0]]].tri0];
        if (subs_[d0].dirichlet[subs_[d0].local(p)]) continue;
        std::vector<int> doms;
        for (int e : edges) {
            const auto& me = m.edges[interface_[e]];
            doms.push_back(m.tags[me.tri0]);
            doms.push_back(m.tags[me.tri1]);
        }
        std::sort(doms.begin(), doms.end());
        doms.erase(std::unique(doms.begin(), doms.end()), doms.end());
        Eigen::MatrixXd a = Eigen::MatrixXd::Zero(static_cast<int>(doms.size()), static_cast<int>(edges.size()));
        Eigen::VectorXd r(static_cast<int>(doms.size()));
        for (std::size_t i = 0; i < doms.size(); ++i) {
            r[i] = residual[doms[i]][subs_[doms[i]].local(p)];
            for (std::size_t j = 0; j < edges.size(); ++j) {
                const auto& me = m.edges[interface_[edges[j]]];
                if (m.tags[me.tri0] == doms[i]) a(i, j) += 1.0;
                if (m.tags[me.tri1] == doms[i]) a(i, j) -= 1.0;
            }
        }
        const Eigen::VectorXd x = a.completeOrthogonalDecomposition().solve(r);
        for (std::size_t j = 0; j < edges.size(); ++j) {
            const auto& me = m.edges[interface_[edges[j]]];
            moment[edges[j]][me.a == p ? 0 : 1] = x[static_cast<int>(j)];
        }
    }
    const double lam = config_.lambda;
    for (std::size_t e = 0; e < interface_.size(); ++e) {
        const auto& me = m.edges[interface_[e]];
        const double len = norm(m.vertices[me.b] - m.vertices[me.a]);
        const double ha = (2.0 / len) * (2.0 * moment[e][0] - moment[e][1]);
        const double hb = (2.0 / len) * (2.0 * moment[e][1] - moment[e][0]);
        for (int q = 0; q < 3; ++q) {
            const double s = gauss3[q].s;
            const double h = (1.0 - s) * ha + s * hb;
            it.data0[e][q] = lam * trace(it, static_cast<int>(e), 1, s) + h;
            it.data1[e][q] = lam * trace(it, static_cast<int>(e), 0, s) - h;
        }
    }
    return it;
}

std::vector<double> LionsSolver::solve_local(int d, const LionsIterate& it) const
{
    const auto& sd = subs_[d];
    const Local& loc = *local_[d];
    std::vector<double> rhs(loc.num_free, 0.0);
    for (std::size_t k = 0; k < sd.vertices.size(); ++k) {
        if (loc.free_index[k] >= 0) rhs[loc.free_index[k]] = loc.load[k];
    }
    for (int e : sd.interface_edges) {
        const auto& me = mesh_->edges[interface_[e]];
        const bool side0 = mesh_->tags[me.tri0] == d;
        const auto& g = side0 ? it.data0[e] : it.data1[e];
        const double len = norm(mesh_->vertices[me.b] - mesh_->vertices[me.a]);
        const int fa = loc.free_index[sd.local(me.a)], fb = loc.free_index[sd.local(me.b)];
        for (int q = 0; q < 3; ++q) {
            const double w = gauss3[q].weight * len * g[q];
            if (fa >= 0) rhs[fa] += w * (1.0 - gauss3[q].s);
            if (fb >= 0) rhs[fb] += w * gauss3[q].s;
        }
    }
    std::vector<double> u(sd.vertices.size(), 0.0);
    if (loc.num_free > 0) {
        const auto x = loc.lu->solve(rhs);
        for (std::size_t k = 0; k < sd.vertices.size(); ++k) {
            if (loc.free_index[k] >= 0) u[k] = x[loc.free_index[k]];
        }
    }
    return u;
}

LionsIterate LionsSolver::step(const LionsIterate& prev) const
{
    LionsIterate next;
    next.iteration = prev.iteration + 1;
    const int nd = num_subdomains();
    next.u.resize(nd);
    if (config_.exec == Exec::Parallel) {
#pragma omp parallel for schedule(dynamic)
        for (int d = 0; d < nd; ++d) next.u[d] = solve_local(d, prev);
    } else {
        for (int d = 0; d < nd; ++d) next.u[d] = solve_local(d, prev);
    }
    const std::size_t ni = interface_.size();
    next.data0.resize(ni);
    next.data1.resize(ni);
    const double lam = config_.lambda;
    for (std::size_t e = 0; e < ni; ++e) {
        if (config_.flux == LionsFlux::Element) {
            const auto data = element_data(next, static_cast<int>(e));
            next.data0[e] = data[0];
            next.data1[e] = data[1];
        } else {
            for (int q = 0; q < 3; ++q) {
                const double s = gauss3[q].s;
                next.data0[e][q] = 2.0 * lam * trace(next, static_cast<int>(e), 1, s) - prev.data1[e][q];
                next.data1[e][q] = 2.0 * lam * trace(next, static_cast<int>(e), 0, s) - prev.data0[e][q];
            }
        }
    }
    return next;
}

double LionsSolver::qoi(const LionsIterate& it) const
{
    long double s = 0.0L;
    for (int t = 0; t < mesh_->num_triangles(); ++t) {
        const auto c = mesh_->corners(t);
        const double area = 0.5 * orient(c[0], c[1], c[2]);
        for (const auto& q : triangle_rule_deg4) {
            const std::array<double, 3> l{q.l0, q.l1, q.l2};
            const Vec2 y = l[0] * c[0] + l[1] * c[1] + l[2] * c[2];
            s += q.weight * area * value(it, t, l) * coeffs_->qoi_weight(mesh_->tags[t], y);
        }
    }
    return static_cast<double>(s);
}

double LionsSolver::broken_h1_distance(const LionsIterate& a, const LionsIterate& b) const
{
    long double s = 0.0L;
    for (int t = 0; t < mesh_->num_triangles(); ++t) {
        const double area = mesh_->area(t);
        const Vec2 g = gradient(a, t) - gradient(b, t);
        s += area * dot(g, g);
        for (const auto& q : triangle_rule_deg4) {
            const std::array<double, 3> l{q.l0, q.l1, q.l2};
            const double du = value(a, t, l) - value(b, t, l);
            s += q.weight * area * du * du;
        }
    }
    return std::sqrt(static_cast<double>(s));
}

double LionsSolver::broken_h1_distance(const LionsIterate& a, const Field& global) const
{
    long double s = 0.0L;
    for (int t = 0; t < mesh_->num_triangles(); ++t) {
        const double area = mesh_->area(t);
        const std::array<double, 3> centre{1.0 / 3, 1.0 / 3, 1.0 / 3};
        const Vec2 g = gradient(a, t) - global.gradient(t, centre);
        s += area * dot(g, g);
        for (const auto& q : triangle_rule_deg4) {
            const std::array<double, 3> l{q.l0, q.l1, q.l2};
            const double du = value(a, t, l) - global.value(t, l);
            s += q.weight * area * du * du;
        }
    }
    return std::sqrt(static_cast<double>(s));
}

LionsBreakdown lions_breakdown(const LionsSolver& solver, const LionsIterate& prev, const LionsIterate& curr,
                               const Field& adjoint, std::optional<double> reference_qoi)
{
    if (curr.iteration != prev.iteration + 1 || curr.u.size() != prev.u.size()) {
        throw InputError("lions_breakdown needs consecutive iterates of one run");
    }
    const TriMesh& m = solver.mesh();
    if (adjoint.space->mesh().num_triangles() != m.num_triangles()
        || adjoint.space->mesh().vertices != m.vertices) {
        throw InputError("adjoint lives on a different mesh");
    }
    const auto& coeffs = solver.coeffs();
    const double lam = solver.config().lambda;

    long double de = 0.0L, ie = 0.0L, ce = 0.0L;
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto c = m.corners(t);
        const double area = 0.5 * orient(c[0], c[1], c[2]);
        const int d = m.tags[t];
        const Vec2 gu = solver.gradient(curr, t);
        for (const auto& q : triangle_rule_deg4) {
            const std::array<double, 3> l{q.l0, q.l1, q.l2};
            const Vec2 y = l[0] * c[0] + l[1] * c[1] + l[2] * c[2];
            de += q.weight * area
                  * (coeffs.source(d, y) * adjoint.value(t, l)
                     - dot(coeffs.diffusion(d, y) * gu, adjoint.gradient(t, l)));
        }
    }
    const auto& iface = solver.interface_edges();
    for (int e = 0; e < static_cast<int>(iface.size()); ++e) {
        const auto& me = m.edges[iface[e]];
        const double len = norm(m.vertices[me.b] - m.vertices[me.a]);
        const Vec2 n0 = solver.normal(e);
        const int d0 = m.tags[me.tri0], d1 = m.tags[me.tri1];
        for (int q = 0; q < 3; ++q) {
            const double s = gauss3[q].s;
            const double w = gauss3[q].weight * len;
            const Vec2 y = (1.0 - s) * m.vertices[me.a] + s * m.vertices[me.b];
            const auto l0 = edge_bary(m.triangles[me.tri0], me.a, me.b, s);
            const auto l1 = edge_bary(m.triangles[me.tri1], me.a, me.b, s);
            const double eta = 0.5 * (adjoint.value(me.tri0, l0) + adjoint.value(me.tri1, l1));
            const Mat2 a0 = coeffs.diffusion(d0, y), a1 = coeffs.diffusion(d1, y);
            const Vec2 avg_flux = 0.5 * (a0 * adjoint.gradient(me.tri0, l0) + a1 * adjoint.gradient(me.tri1, l1));

            const double u0 = solver.trace(curr, e, 0, s), u1 = solver.trace(curr, e, 1, s);
            const double p0 = solver.trace(prev, e, 0, s), p1 = solver.trace(prev, e, 1, s);
            const double f0 = solver.outward_flux(curr, e, 0, q), f1 = solver.outward_flux(curr, e, 1, q);
            const double pf0 = solver.outward_flux(prev, e, 0, q), pf1 = solver.outward_flux(prev, e, 1, q);
            // n_0·A_1∇U_1 = -f1 and n_1·A_0∇U_0 = -f0.
            de += w * ((-lam * u0 + lam * p1 - pf1) + (-lam * u1 + lam * p0 - pf0)) * eta;
            ie += w * ((lam * u0 - lam * p0 + pf0 - f0) + (lam * u1 - lam * p1 + pf1 - f1)) * eta;
            ce += 0.5 * w
                  * (((f0 + f1) * eta + dot(n0, avg_flux) * (u0 - u1))
                     + ((f1 + f0) * eta + dot(-n0, avg_flux) * (u1 - u0)));
        }
    }
    LionsBreakdown row;
    row.iteration = curr.iteration;
    row.de = static_cast<double>(de);
    row.ie = static_cast<double>(ie);
    row.ce = static_cast<double>(ce);
    row.total = row.de + row.ie + row.ce;
    row.qoi = solver.qoi(curr);
    if (reference_qoi) {
        row.reference_error = *reference_qoi - row.qoi;
        row.effectivity = effectivity(row.total, *reference_qoi, row.qoi);
    }
    return row;
}

LionsRun run_lions(const LionsSolver& solver, const Field& adjoint, std::optional<double> reference_qoi,
                   const LionsIterate* start)
{
    LionsRun run;
    LionsIterate it = start ? *start : solver.initial_iterate();
    const auto& cfg = solver.config();
    int quiet = 0;
    for (int i = 1; i <= cfg.max_iterations; ++i) {
        LionsIterate next = solver.step(it);
        const LionsBreakdown row = lions_breakdown(solver, it, next, adjoint, reference_qoi);
        quiet = std::abs(row.ie) < 0.01 * std::abs(row.de) ? quiet + 1 : 0;
        const bool stop = cfg.early_stop && quiet >= 3;
        if (next.iteration % cfg.record_stride == 0 || i == cfg.max_iterations || stop) {
            run.rows.push_back(row);
        }
        it = std::move(next);
        if (stop) {
            run.early_stopped = true;
            break;
        }
    }
    run.last = std::move(it);
    return run;
}

void write_lions_csv(std::ostream& out, const std::vector<LionsBreakdown>& rows)
{
    out << "i,Q,DE,IE,CE,total,reference_error,effectivity\n";
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const auto& r : rows) {
        out << r.iteration << ',' << num(r.qoi) << ',' << num(r.de) << ',' << num(r.ie) << ',' << num(r.ce) << ','
            << num(r.total) << ',' << (r.reference_error ? num(*r.reference_error) : "") << ','
            << (r.effectivity ? num(*r.effectivity) : "") << '\n';
    }
}

} // namespace stochdom
