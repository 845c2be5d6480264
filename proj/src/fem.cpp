#include "stochdom/fem.hpp"

#include "stochdom/error.hpp"
#include "stochdom/quadrature.hpp"
#include "stochdom/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <ostream>
#include <unordered_set>

namespace stochdom {

namespace {

std::uint64_t key(int a, int b)
{
    return (static_cast<std::uint64_t>(std::max(a, b)) << 32) | static_cast<std::uint64_t>(std::min(a, b));
}

/// Basis values and gradients given the barycentric gradients of the element.
void eval_basis(int degree, const std::array<double, 3>& l, const std::array<Vec2, 3>& g, double* phi, Vec2* grad)
{
    if (degree == 1) {
        for (int i = 0; i < 3; ++i) {
            if (phi) phi[i] = l[i];
            if (grad) grad[i] = g[i];
        }
        return;
    }
    for (int i = 0; i < 3; ++i) {
        if (phi) phi[i] = l[i] * (2.0 * l[i] - 1.0);
        if (grad) grad[i] = (4.0 * l[i] - 1.0) * g[i];
    }
    for (int k = 0; k < 3; ++k) {
        const int j = (k + 1) % 3;
        if (phi) phi[3 + k] = 4.0 * l[k] * l[j];
        if (grad) grad[3 + k] = 4.0 * (l[j] * g[k] + l[k] * g[j]);
    }
}

Vec2 point_at(const std::array<Vec2, 3>& c, const std::array<double, 3>& l)
{
    return l[0] * c[0] + l[1] * c[1] + l[2] * c[2];
}

bool is_spd(const Mat2& a)
{
    const double asym = std::abs(a.a12 - a.a21);
    const double scale = max_abs_entry(a);
    return asym <= 1e-10 * scale && symmetric_eigenvalues(a).first > 0.0;
}

/// Runs `local(t, out)` for every element (optionally in parallel) into a
/// contiguous buffer, then returns the buffer for ordered scatter.
template <typename Local>
std::vector<double> element_buffers(int num_elements, int stride, Exec exec, Local&& local)
{
    std::vector<double> buf(static_cast<std::size_t>(num_elements) * stride, 0.0);
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (int t = 0; t < num_elements; ++t) {
            local(t, buf.data() + static_cast<std::size_t>(t) * stride);
        }
    } else {
        for (int t = 0; t < num_elements; ++t) {
            local(t, buf.data() + static_cast<std::size_t>(t) * stride);
        }
    }
    return buf;
}

} // namespace

std::array<Vec2, 3> barycentric_gradients(const std::array<Vec2, 3>& c)
{
    const double two_area = orient(c[0], c[1], c[2]);
    std::array<Vec2, 3> g;
    for (int i = 0; i < 3; ++i) {
        const Vec2& pj = c[(i + 1) % 3];
        const Vec2& pk = c[(i + 2) % 3];
        g[i] = {(pj.y - pk.y) / two_area, (pk.x - pj.x) / two_area};
    }
    return g;
}

FeSpace::FeSpace(std::shared_ptr<const TriMesh> mesh, int degree) : mesh_(std::move(mesh)), degree_(degree)
{
    if (!mesh_) {
        throw InputError("finite element space needs a mesh");
    }
    if (degree != 1 && degree != 2) {
        throw InputError("only P1 and P2 elements are supported");
    }
    topo_ = build_edge_topology(*mesh_);
    const int nv = mesh_->num_vertices();
    num_dofs_ = nv + (degree == 2 ? static_cast<int>(topo_.edges.size()) : 0);
    dirichlet_.assign(num_dofs_, 0);
    std::unordered_set<std::uint64_t> boundary;
    for (const auto& e : mesh_->edges) {
        if (e.flag == EdgeFlag::Dirichlet) {
            dirichlet_[e.a] = 1;
            dirichlet_[e.b] = 1;
            boundary.insert(key(e.a, e.b));
        }
    }
    if (degree == 2) {
        for (std::size_t e = 0; e < topo_.edges.size(); ++e) {
            if (boundary.count(key(topo_.edges[e][0], topo_.edges[e][1]))) {
                dirichlet_[nv + e] = 1;
            }
        }
    }
    free_index_.assign(num_dofs_, -1);
    for (int i = 0; i < num_dofs_; ++i) {
        if (!dirichlet_[i]) {
            free_index_[i] = static_cast<int>(free_dofs_.size());
            free_dofs_.push_back(i);
        }
    }
}

std::array<int, 6> FeSpace::element_dofs(int t) const
{
    const auto& tri = mesh_->triangles[t];
    std::array<int, 6> d{tri[0], tri[1], tri[2], -1, -1, -1};
    if (degree_ == 2) {
        const int nv = mesh_->num_vertices();
        for (int k = 0; k < 3; ++k) {
            d[3 + k] = nv + topo_.triangle_edges[t][k];
        }
    }
    return d;
}

Vec2 FeSpace::dof_point(int dof) const
{
    const int nv = mesh_->num_vertices();
    if (dof < nv) {
        return mesh_->vertices[dof];
    }
    const auto& e = topo_.edges[dof - nv];
    return 0.5 * (mesh_->vertices[e[0]] + mesh_->vertices[e[1]]);
}

void FeSpace::basis(int t, const std::array<double, 3>& bary, double* phi, Vec2* grad) const
{
    eval_basis(degree_, bary, barycentric_gradients(mesh_->corners(t)), phi, grad);
}

std::shared_ptr<const FeSpace> make_space(const TriMesh& mesh, int degree)
{
    return std::make_shared<const FeSpace>(std::make_shared<const TriMesh>(mesh), degree);
}

double Field::value(int t, const std::array<double, 3>& bary) const
{
    double phi[6];
    space->basis(t, bary, phi, nullptr);
    const auto dofs = space->element_dofs(t);
    double u = 0.0;
    for (int i = 0; i < space->dofs_per_element(); ++i) {
        u += values[dofs[i]] * phi[i];
    }
    return u;
}

Vec2 Field::gradient(int t, const std::array<double, 3>& bary) const
{
    Vec2 grad[6];
    space->basis(t, bary, nullptr, grad);
    const auto dofs = space->element_dofs(t);
    Vec2 g{};
    for (int i = 0; i < space->dofs_per_element(); ++i) {
        g += values[dofs[i]] * grad[i];
    }
    return g;
}

Field interpolate(std::shared_ptr<const FeSpace> space, const std::function<double(const Vec2&)>& f)
{
    Field u{space, std::vector<double>(space->num_dofs())};
    for (int i = 0; i < space->num_dofs(); ++i) {
        u.values[i] = f(space->dof_point(i));
    }
    return u;
}

CsrMatrix assemble_operator(const FeSpace& space, const TransformedCoefficients& coeffs, bool convection,
                            const AssemblyOptions& opt)
{
    const TriMesh& mesh = space.mesh();
    const int n = space.dofs_per_element();
    const int nt = mesh.num_triangles();
    const bool with_b = convection && coeffs.has_convection();
    std::vector<char> bad(nt, 0);

    const auto buf = element_buffers(nt, n * n, opt.exec, [&](int t, double* ke) {
        const auto c = mesh.corners(t);
        const auto g = barycentric_gradients(c);
        const double area = 0.5 * orient(c[0], c[1], c[2]);
        const int d = mesh.tags[t];
        double phi[6];
        Vec2 grad[6];
        for (const auto& q : triangle_rule_deg4) {
            const std::array<double, 3> l{q.l0, q.l1, q.l2};
            eval_basis(space.degree(), l, g, phi, grad);
            const Vec2 y = point_at(c, l);
            const Mat2 a = coeffs.diffusion(d, y);
            if (!is_spd(a)) {
                bad[t] = 1;
            }
            const Vec2 b = with_b ? coeffs.convection(d, y) : Vec2{};
            const double w = q.weight * area;
            for (int j = 0; j < n; ++j) {
                const Vec2 ag = a * grad[j];
                const double bg = dot(b, grad[j]);
                for (int i = 0; i < n; ++i) {
                    const double v = w * (dot(ag, grad[i]) + bg * phi[i]);
                    if (opt.transpose) {
                        ke[j * n + i] += v;
                    } else {
                        ke[i * n + j] += v;
                    }
                }
            }
        }
    });
    for (int t = 0; t < nt; ++t) {
        if (bad[t]) {
            throw AssemblyError(mesh.tags[t], "diffusion is not symmetric positive definite at a quadrature point");
        }
    }

    std::vector<Triplet> trip;
    trip.reserve(static_cast<std::size_t>(nt) * n * n);
    for (int t = 0; t < nt; ++t) {
        const auto dofs = space.element_dofs(t);
        const double* ke = buf.data() + static_cast<std::size_t>(t) * n * n;
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                trip.push_back({dofs[i], dofs[j], ke[i * n + j]});
            }
        }
    }
    return CsrMatrix::from_triplets(space.num_dofs(), space.num_dofs(), std::move(trip));
}

CsrMatrix assemble_mass(const FeSpace& space)
{
    const TriMesh& mesh = space.mesh();
    const int n = space.dofs_per_element();
    std::vector<Triplet> trip;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto c = mesh.corners(t);
        const auto g = barycentric_gradients(c);
        const double area = 0.5 * orient(c[0], c[1], c[2]);
        const auto dofs = space.element_dofs(t);
        double me[36] = {};
        double phi[6];
        for (const auto& q : triangle_rule_deg4) {
            eval_basis(space.degree(), {q.l0, q.l1, q.l2}, g, phi, nullptr);
            for (int i = 0; i < n; ++i) {
                for (int j = 0; j < n; ++j) {
                    me[i * n + j] += q.weight * area * phi[i] * phi[j];
                }
            }
        }
        for (int i = 0; i < n; ++i) {
            for (int j = 0; j < n; ++j) {
                trip.push_back({dofs[i], dofs[j], me[i * n + j]});
            }
        }
    }
    return CsrMatrix::from_triplets(space.num_dofs(), space.num_dofs(), std::move(trip));
}

std::vector<double> assemble_load(const FeSpace& space, const SubdomainFunction& g, Exec exec)
{
    const TriMesh& mesh = space.mesh();
    const int n = space.dofs_per_element();
    const int nt = mesh.num_triangles();
    const auto buf = element_buffers(nt, n, exec, [&](int t, double* fe) {
        const auto c = mesh.corners(t);
        const auto grads = barycentric_gradients(c);
        const double area = 0.5 * orient(c[0], c[1], c[2]);
        const int d = mesh.tags[t];
        double phi[6];
        for (const auto& q : triangle_rule_deg4) {
            const std::array<double, 3> l{q.l0, q.l1, q.l2};
            eval_basis(space.degree(), l, grads, phi, nullptr);
            const double w = q.weight * area * g(d, point_at(c, l));
            for (int i = 0; i < n; ++i) {
                fe[i] += w * phi[i];
            }
        }
    });
    std::vector<double> load(space.num_dofs(), 0.0);
    for (int t = 0; t < nt; ++t) {
        const auto dofs = space.element_dofs(t);
        for (int i = 0; i < n; ++i) {
            load[dofs[i]] += buf[static_cast<std::size_t>(t) * n + i];
        }
    }
    return load;
}

LinearSystem eliminate_dirichlet(std::shared_ptr<const FeSpace> space, const CsrMatrix& full,
                                 const std::vector<double>& load)
{
    LinearSystem sys;
    const int nf = space->num_free();
    std::vector<Triplet> trip;
    trip.reserve(full.nnz());
    sys.rhs.resize(nf);
    for (int r = 0; r < nf; ++r) {
        const int dof = space->free_dofs()[r];
        sys.rhs[r] = load[dof];
        for (int k = full.row_ptr[dof]; k < full.row_ptr[dof + 1]; ++k) {
            const int c = space->free_index(full.col[k]);
            if (c >= 0) {
                trip.push_back({r, c, full.val[k]});
            }
        }
    }
    sys.matrix = CsrMatrix::from_triplets(nf, nf, std::move(trip));
    sys.symmetric = sys.matrix.is_symmetric();
    sys.space = std::move(space);
    return sys;
}

LinearSystem assemble(std::shared_ptr<const FeSpace> space, const TransformedCoefficients& coeffs, bool convection,
                      const AssemblyOptions& opt)
{
    const CsrMatrix full = assemble_operator(*space, coeffs, convection, opt);
    const auto load = assemble_load(
        *space, [&coeffs](int d, const Vec2& y) { return coeffs.source(d, y); }, opt.exec);
    return eliminate_dirichlet(std::move(space), full, load);
}

Field solve(const LinearSystem& system, const SolverOptions& opt, SolveReport* report)
{
    const auto x = solve_linear(system.matrix, system.rhs, opt, report);
    Field u{system.space, std::vector<double>(system.space->num_dofs(), 0.0)};
    for (int r = 0; r < system.space->num_free(); ++r) {
        u.values[system.space->free_dofs()[r]] = x[r];
    }
    return u;
}

double qoi(const Field& field, const TransformedCoefficients& coeffs, Exec exec)
{
    const TriMesh& mesh = field.space->mesh();
    const int nt = mesh.num_triangles();
    const auto buf = element_buffers(nt, 1, exec, [&](int t, double* out) {
        const auto c = mesh.corners(t);
        const double area = 0.5 * orient(c[0], c[1], c[2]);
        for (const auto& q : triangle_rule_deg4) {
            const std::array<double, 3> l{q.l0, q.l1, q.l2};
            *out += q.weight * area * field.value(t, l) * coeffs.qoi_weight(mesh.tags[t], point_at(c, l));
        }
    });
    double s = 0.0;
    for (double v : buf) {
        s += v;
    }
    return s;
}

SampleSolution solve_sample(const BoundarySample& sample, std::shared_ptr<const Partition> partition,
                            std::shared_ptr<const ProblemData> data, std::shared_ptr<const FeSpace> space,
                            const SolverOptions& opt, Exec exec)
{
    try {
        SampleSolution out;
        auto maps = affine_maps(*partition, sample);
        out.coeffs = std::make_shared<const TransformedCoefficients>(data, std::move(maps), partition);
        const LinearSystem sys = assemble(space, *out.coeffs, data->has_convection, {false, exec});
        out.field = solve(sys, opt, &out.report);
        out.qoi = qoi(out.field, *out.coeffs);
        return out;
    } catch (const SampleError&) {
        throw;
    } catch (const Error& e) {
        throw SampleError(sample.index, e.what());
    }
}

ConditionEstimate condition_estimate(const CsrMatrix& a, double rel_tol, int max_iterations)
{
    if (a.rows != a.cols || a.rows == 0) {
        throw InputError("condition_estimate needs a non-empty square matrix");
    }
    const int n = a.rows;
    CounterStream stream(0x5eed, 1, 0);
    std::vector<double> start(n);
    for (double& v : start) {
        v = 0.5 + stream.next_uniform();
    }
    auto normalize = [](std::vector<double>& v) {
        const double s = norm2(v);
        for (double& x : v) x /= s;
    };

    ConditionEstimate est;
    // Power iteration for λ_max.
    std::vector<double> v = start, w(n);
    normalize(v);
    bool conv_max = false;
    int it = 0;
    for (; it < max_iterations; ++it) {
        a.multiply(v, w, Exec::Serial);
        const double rho = dot(v, w);
        double res = 0.0;
        for (int i = 0; i < n; ++i) res += (w[i] - rho * v[i]) * (w[i] - rho * v[i]);
        est.lambda_max = rho;
        if (std::sqrt(res) <= rel_tol * std::abs(rho)) {
            conv_max = true;
            break;
        }
        v = w;
        normalize(v);
    }
    est.iterations = it + 1;

    // Inverse power iteration for λ_min.
    const SparseFactorization lu(a);
    v = start;
    normalize(v);
    bool conv_min = false;
    for (it = 0; it < max_iterations; ++it) {
        w = lu.solve(v);
        const double mu = dot(v, w);
        double res = 0.0;
        for (int i = 0; i < n; ++i) res += (w[i] - mu * v[i]) * (w[i] - mu * v[i]);
        v = w;
        normalize(v);
        if (std::sqrt(res) <= rel_tol * std::abs(mu)) {
            conv_min = true;
            break;
        }
    }
    est.iterations += it + 1;
    a.multiply(v, w, Exec::Serial);
    est.lambda_min = dot(v, w);
    est.value = est.lambda_max / est.lambda_min;
    est.converged = conv_max && conv_min;
    return est;
}

double poincare_factor(const TriMesh& mesh, double rel_tol)
{
    auto data = std::make_shared<ProblemData>();
    data->diffusion = [](const Vec2&) { return Mat2::identity(); };
    data->source = [](const Vec2&) { return 0.0; };
    data->qoi_weight = [](const Vec2&) { return 0.0; };
    AffineMapSet maps;
    maps.maps.resize(mesh.num_subdomains);
    const TransformedCoefficients coeffs(data, maps);
    auto space = make_space(mesh, 1);
    const CsrMatrix k_full = assemble_operator(*space, coeffs, false, {false, Exec::Serial});
    const CsrMatrix m_full = assemble_mass(*space);
    const std::vector<double> zero(space->num_dofs(), 0.0);
    const CsrMatrix k = eliminate_dirichlet(space, k_full, zero).matrix;
    const CsrMatrix m = eliminate_dirichlet(space, m_full, zero).matrix;
    const SparseFactorization lu(k);

    std::vector<double> x(k.rows, 1.0), mx;
    double lambda = 0.0;
    for (int it = 0; it < 10000; ++it) {
        m.multiply(x, mx, Exec::Serial);
        x = lu.solve(mx);
        const auto kx = k * x;
        const auto mx2 = m * x;
        const double next = dot(x, kx) / dot(x, mx2);
        const double scale = std::sqrt(dot(x, mx2));
        for (double& v : x) v /= scale;
        if (it > 0 && std::abs(next - lambda) <= rel_tol * next) {
            lambda = next;
            break;
        }
        lambda = next;
    }
    return lambda / (1.0 + lambda);
}

void write_field(std::ostream& out, const Field& field)
{
    char buf[64];
    for (std::size_t i = 0; i < field.values.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%zu %.17g\n", i, field.values[i]);
        out << buf;
    }
}

void write_system(std::ostream& out, const LinearSystem& system)
{
    char buf[96];
    const CsrMatrix& m = system.matrix;
    for (int r = 0; r < m.rows; ++r) {
        for (int k = m.row_ptr[r]; k < m.row_ptr[r + 1]; ++k) {
            std::snprintf(buf, sizeof buf, "%d %d %.17g\n", r, m.col[k], m.val[k]);
            out << buf;
        }
    }
}

} // namespace stochdom
