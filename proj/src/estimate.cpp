#include "stochdom/estimate.hpp"

#include "stochdom/error.hpp"
#include "stochdom/quadrature.hpp"

#include <cmath>
#include <cstdio>
#include <ostream>

namespace stochdom {

namespace {

bool same_mesh(const TriMesh& a, const TriMesh& b)
{
    return &a == &b || (a.vertices == b.vertices && a.triangles == b.triangles && a.tags == b.tags);
}

std::vector<double> signed_contributions(const Field& primal, const Field& adjoint,
                                         const TransformedCoefficients& coeffs, bool convection, Exec exec)
{
    const TriMesh& mesh = primal.space->mesh();
    if (!same_mesh(mesh, adjoint.space->mesh())) {
        throw InputError("primal and adjoint fields live on different meshes");
    }
    const bool with_b = convection && coeffs.has_convection();
    const int nt = mesh.num_triangles();
    std::vector<double> out(nt, 0.0);
    auto element = [&](int t) {
        const auto c = mesh.corners(t);
        const double area = 0.5 * orient(c[0], c[1], c[2]);
        const int d = mesh.tags[t];
        double s = 0.0;
        for (const auto& q : triangle_rule_deg4) {
            const std::array<double, 3> l{q.l0, q.l1, q.l2};
            const Vec2 y = l[0] * c[0] + l[1] * c[1] + l[2] * c[2];
            const double eta = adjoint.value(t, l);
            const Vec2 grad_eta = adjoint.gradient(t, l);
            const Vec2 grad_u = primal.gradient(t, l);
            double r = coeffs.source(d, y) * eta - dot(coeffs.diffusion(d, y) * grad_u, grad_eta);
            if (with_b) {
                r -= dot(coeffs.convection(d, y), grad_u) * eta;
            }
            s += q.weight * area * r;
        }
        out[t] = s;
    };
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (int t = 0; t < nt; ++t) {
            element(t);
        }
    } else {
        for (int t = 0; t < nt; ++t) {
            element(t);
        }
    }
    return out;
}

} // namespace

Field solve_adjoint(std::shared_ptr<const FeSpace> space, const TransformedCoefficients& coeffs, bool convection,
                    const SolverOptions& opt, SolveReport* report, Exec exec)
{
    const CsrMatrix full = assemble_operator(*space, coeffs, convection, {true, exec});
    const auto load = assemble_load(
        *space, [&coeffs](int d, const Vec2& y) { return coeffs.qoi_weight(d, y); }, exec);
    return solve(eliminate_dirichlet(std::move(space), full, load), opt, report);
}

ErrorEstimate error_estimate(const Field& primal, const Field& adjoint, const TransformedCoefficients& coeffs,
                             bool convection, Exec exec)
{
    const auto parts = signed_contributions(primal, adjoint, coeffs, convection, exec);
    long double s = 0.0L;
    for (double v : parts) {
        s += v;
    }
    ErrorEstimate e;
    e.total = static_cast<double>(s);
    e.sample_index = coeffs.maps().sample_index;
    return e;
}

IndicatorField element_indicators(const Field& primal, const Field& adjoint, const TransformedCoefficients& coeffs,
                                  bool convection, Exec exec)
{
    IndicatorField ind;
    ind.signed_values = signed_contributions(primal, adjoint, coeffs, convection, exec);
    ind.values.resize(ind.signed_values.size());
    for (std::size_t k = 0; k < ind.values.size(); ++k) {
        ind.values[k] = std::abs(ind.signed_values[k]);
    }
    return ind;
}

std::optional<double> effectivity(double estimate, double reference_qoi, double computed_qoi)
{
    const double err = reference_qoi - computed_qoi;
    if (std::abs(err) < 1e-14) {
        return std::nullopt;
    }
    return estimate / err;
}

double reference_qoi(const TriMesh& mesh, const TransformedCoefficients& coeffs, bool convection, int sweeps,
                     const SolverOptions& opt)
{
    const auto space = make_space(bisect_all(mesh, 2 * sweeps), 2);
    const Field u = solve(assemble(space, coeffs, convection), opt);
    return qoi(u, coeffs);
}

void write_indicators(std::ostream& out, const IndicatorField& indicators)
{
    char buf[96];
    for (int k = 0; k < indicators.size(); ++k) {
        std::snprintf(buf, sizeof buf, "%d %.17g %.17g\n", k, indicators.values[k], indicators.signed_values[k]);
        out << buf;
    }
}

} // namespace stochdom
