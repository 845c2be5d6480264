#include "stochdom/sparse.hpp"

#include "stochdom/error.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace stochdom {

CsrMatrix CsrMatrix::from_triplets(int rows, int cols, std::vector<Triplet> triplets)
{
    for (const auto& t : triplets) {
        if (t.row < 0 || t.row >= rows || t.col < 0 || t.col >= cols) {
            throw InputError("triplet index out of range");
        }
    }
    std::stable_sort(triplets.begin(), triplets.end(), [](const Triplet& a, const Triplet& b) {
        return a.row != b.row ? a.row < b.row : a.col < b.col;
    });
    CsrMatrix m;
    m.rows = rows;
    m.cols = cols;
    m.row_ptr.assign(rows + 1, 0);
    for (std::size_t k = 0; k < triplets.size();) {
        const int r = triplets[k].row;
        const int c = triplets[k].col;
        double sum = 0.0;
        while (k < triplets.size() && triplets[k].row == r && triplets[k].col == c) {
            sum += triplets[k].value;
            ++k;
        }
        m.col.push_back(c);
        m.val.push_back(sum);
        ++m.row_ptr[r + 1];
    }
    std::partial_sum(m.row_ptr.begin(), m.row_ptr.end(), m.row_ptr.begin());
    return m;
}

CsrMatrix CsrMatrix::identity(int n)
{
    std::vector<Triplet> t;
    for (int i = 0; i < n; ++i) {
        t.push_back({i, i, 1.0});
    }
    return from_triplets(n, n, std::move(t));
}

double CsrMatrix::at(int r, int c) const
{
    const auto first = col.begin() + row_ptr[r];
    const auto last = col.begin() + row_ptr[r + 1];
    const auto it = std::lower_bound(first, last, c);
    return (it != last && *it == c) ? val[it - col.begin()] : 0.0;
}

std::vector<double> CsrMatrix::diagonal() const
{
    std::vector<double> d(std::min(rows, cols), 0.0);
    for (int i = 0; i < static_cast<int>(d.size()); ++i) {
        d[i] = at(i, i);
    }
    return d;
}

CsrMatrix CsrMatrix::transpose() const
{
    std::vector<Triplet> t;
    t.reserve(val.size());
    for (int r = 0; r < rows; ++r) {
        for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
            t.push_back({col[k], r, val[k]});
        }
    }
    return from_triplets(cols, rows, std::move(t));
}

double CsrMatrix::max_asymmetry() const
{
    if (rows != cols) {
        return INFINITY;
    }
    double scale = 0.0;
    double diff = 0.0;
    for (int r = 0; r < rows; ++r) {
        for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
            scale = std::max(scale, std::abs(val[k]));
            diff = std::max(diff, std::abs(val[k] - at(col[k], r)));
        }
    }
    return scale > 0.0 ? diff / scale : 0.0;
}

void CsrMatrix::multiply(const std::vector<double>& x, std::vector<double>& y, Exec exec) const
{
    y.resize(rows);
    if (exec == Exec::Parallel) {
#pragma omp parallel for schedule(static)
        for (int r = 0; r < rows; ++r) {
            double s = 0.0;
            for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
                s += val[k] * x[col[k]];
            }
            y[r] = s;
        }
    } else {
        for (int r = 0; r < rows; ++r) {
            double s = 0.0;
            for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) {
                s += val[k] * x[col[k]];
            }
            y[r] = s;
        }
    }
}

std::vector<double> CsrMatrix::operator*(const std::vector<double>& x) const
{
    std::vector<double> y;
    multiply(x, y, Exec::Serial);
    return y;
}

double dot(const std::vector<double>& a, const std::vector<double>& b)
{
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        s += a[i] * b[i];
    }
    return s;
}

double norm2(const std::vector<double>& a) { return std::sqrt(dot(a, a)); }

namespace {

int iteration_cap(const SolverOptions& opt, int n) { return opt.max_iterations > 0 ? opt.max_iterations : 10 * n + 100; }

void check_square(const CsrMatrix& a, const std::vector<double>& b)
{
    if (a.rows != a.cols || static_cast<int>(b.size()) != a.rows) {
        throw InputError("linear system dimensions do not match");
    }
}

Eigen::SparseMatrix<double> to_eigen(const CsrMatrix& a)
{
    std::vector<Eigen::Triplet<double>> t;
    t.reserve(a.val.size());
    for (int r = 0; r < a.rows; ++r) {
        for (int k = a.row_ptr[r]; k < a.row_ptr[r + 1]; ++k) {
            t.emplace_back(r, a.col[k], a.val[k]);
        }
    }
    Eigen::SparseMatrix<double> m(a.rows, a.cols);
    m.setFromTriplets(t.begin(), t.end());
    m.makeCompressed();
    return m;
}

} // namespace

std::vector<double> pcg(const CsrMatrix& a, const std::vector<double>& b, const SolverOptions& opt,
                        SolveReport* report)
{
    check_square(a, b);
    const int n = a.rows;
    std::vector<double> x(n, 0.0), r = b, z(n), p(n), q(n);
    std::vector<double> inv_diag = a.diagonal();
    for (double& d : inv_diag) {
        if (!(d > 0.0)) {
            throw SolverError("CG needs a positive diagonal", {});
        }
        d = 1.0 / d;
    }
    const double bnorm = norm2(b);
    std::vector<double> history;
    SolveReport local;
    local.used = SolverKind::CG;
    if (bnorm == 0.0) {
        if (report) *report = local;
        return x;
    }
    for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
    p = z;
    double rz = dot(r, z);
    double rel = 1.0;
    history.push_back(rel);
    const int cap = iteration_cap(opt, n);
    int it = 0;
    while (rel > opt.tol) {
        if (it >= cap) {
            throw SolverError("CG did not converge in " + std::to_string(cap) + " iterations (relative residual "
                                  + std::to_string(rel) + ")",
                              history);
        }
        a.multiply(p, q, opt.exec);
        const double pq = dot(p, q);
        if (!(pq > 0.0)) {
            throw SolverError("CG breakdown: matrix is not positive definite", history);
        }
        const double alpha = rz / pq;
        for (int i = 0; i < n; ++i) {
            x[i] += alpha * p[i];
            r[i] -= alpha * q[i];
        }
        for (int i = 0; i < n; ++i) z[i] = inv_diag[i] * r[i];
        const double rz_new = dot(r, z);
        const double beta = rz_new / rz;
        rz = rz_new;
        for (int i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
        ++it;
        rel = norm2(r) / bnorm;
        history.push_back(rel);
    }
    local.iterations = it;
    local.relative_residual = rel;
    local.residual_history = std::move(history);
    if (report) *report = std::move(local);
    return x;
}

std::vector<double> bicgstab(const CsrMatrix& a, const std::vector<double>& b, const SolverOptions& opt,
                             SolveReport* report)
{
    check_square(a, b);
    const int n = a.rows;
    std::vector<double> inv_diag = a.diagonal();
    for (double& d : inv_diag) {
        d = d != 0.0 ? 1.0 / d : 1.0;
    }
    std::vector<double> x(n, 0.0), r = b, r0 = b, p(n, 0.0), v(n, 0.0), s(n), t(n), ph(n), sh(n);
    const double bnorm = norm2(b);
    SolveReport local;
    local.used = SolverKind::BiCGStab;
    if (bnorm == 0.0) {
        if (report) *report = local;
        return x;
    }
    double rho = 1.0, alpha = 1.0, omega = 1.0;
    double rel = 1.0;
    std::vector<double> history{rel};
    const int cap = iteration_cap(opt, n);
    int it = 0;
    for (;;) {
        if (rel <= opt.tol) {
            // Confirm with the true residual; the recursive one drifts near breakdown.
            std::vector<double> ax;
            a.multiply(x, ax, opt.exec);
            for (int i = 0; i < n; ++i) r[i] = b[i] - ax[i];
            rel = norm2(r) / bnorm;
            history.back() = rel;
            if (rel <= opt.tol) break;
            r0 = r;
            std::fill(p.begin(), p.end(), 0.0);
            std::fill(v.begin(), v.end(), 0.0);
            rho = alpha = omega = 1.0;
        }
        if (it >= cap) {
            throw SolverError("BiCGStab did not converge in " + std::to_string(cap) + " iterations", history);
        }
        const double rho_new = dot(r0, r);
        if (rho_new == 0.0 || omega == 0.0) {
            throw SolverError("BiCGStab breakdown", history);
        }
        const double beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for (int i = 0; i < n; ++i) p[i] = r[i] + beta * (p[i] - omega * v[i]);
        for (int i = 0; i < n; ++i) ph[i] = inv_diag[i] * p[i];
        a.multiply(ph, v, opt.exec);
        alpha = rho / dot(r0, v);
        for (int i = 0; i < n; ++i) s[i] = r[i] - alpha * v[i];
        if (norm2(s) / bnorm <= opt.tol) {
            for (int i = 0; i < n; ++i) x[i] += alpha * ph[i];
            r = s;
            ++it;
            rel = norm2(r) / bnorm;
            history.push_back(rel);
            continue;
        }
        for (int i = 0; i < n; ++i) sh[i] = inv_diag[i] * s[i];
        a.multiply(sh, t, opt.exec);
        const double tt = dot(t, t);
        omega = tt > 0.0 ? dot(t, s) / tt : 0.0;
        for (int i = 0; i < n; ++i) {
            x[i] += alpha * ph[i] + omega * sh[i];
            r[i] = s[i] - omega * t[i];
        }
        ++it;
        rel = norm2(r) / bnorm;
        history.push_back(rel);
    }
    local.iterations = it;
    local.relative_residual = rel;
    local.residual_history = std::move(history);
    if (report) *report = std::move(local);
    return x;
}

struct SparseFactorization::Impl {
    Eigen::SparseLU<Eigen::SparseMatrix<double>, Eigen::COLAMDOrdering<int>> lu;
};

SparseFactorization::SparseFactorization(const CsrMatrix& a) : impl_(std::make_unique<Impl>()), n_(a.rows)
{
    if (a.rows != a.cols) {
        throw InputError("factorization needs a square matrix");
    }
    const auto m = to_eigen(a);
    impl_->lu.analyzePattern(m);
    impl_->lu.factorize(m);
    if (impl_->lu.info() != Eigen::Success) {
        throw SolverError("sparse LU factorization failed (singular matrix?)", {});
    }
}

SparseFactorization::~SparseFactorization() = default;
SparseFactorization::SparseFactorization(SparseFactorization&&) noexcept = default;
SparseFactorization& SparseFactorization::operator=(SparseFactorization&&) noexcept = default;

std::vector<double> SparseFactorization::solve(const std::vector<double>& b) const
{
    if (static_cast<int>(b.size()) != n_) {
        throw InputError("right-hand side has the wrong size");
    }
    const Eigen::Map<const Eigen::VectorXd> rhs(b.data(), n_);
    const Eigen::VectorXd x = impl_->lu.solve(rhs);
    return std::vector<double>(x.data(), x.data() + n_);
}

std::vector<double> direct_solve(const CsrMatrix& a, const std::vector<double>& b, SolveReport* report)
{
    check_square(a, b);
    std::vector<double> x;
    if (a.is_symmetric()) {
        const auto m = to_eigen(a);
        Eigen::SimplicialLDLT<Eigen::SparseMatrix<double>> ldlt(m);
        if (ldlt.info() != Eigen::Success) {
            throw SolverError("sparse LDLT factorization failed", {});
        }
        const Eigen::Map<const Eigen::VectorXd> rhs(b.data(), a.rows);
        const Eigen::VectorXd sol = ldlt.solve(rhs);
        x.assign(sol.data(), sol.data() + a.rows);
    } else {
        x = SparseFactorization(a).solve(b);
    }
    if (report) {
        std::vector<double> r = a * x;
        for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
        const double bnorm = norm2(b);
        report->used = SolverKind::Direct;
        report->iterations = 1;
        report->relative_residual = bnorm > 0.0 ? norm2(r) / bnorm : 0.0;
        report->residual_history = {report->relative_residual};
    }
    return x;
}

std::vector<double> solve_linear(const CsrMatrix& a, const std::vector<double>& b, const SolverOptions& opt,
                                 SolveReport* report)
{
    switch (opt.kind) {
    case SolverKind::Auto:
        return a.is_symmetric() ? pcg(a, b, opt, report) : direct_solve(a, b, report);
    case SolverKind::CG:
        return pcg(a, b, opt, report);
    case SolverKind::BiCGStab:
        return bicgstab(a, b, opt, report);
    case SolverKind::Direct:
        return direct_solve(a, b, report);
    }
    throw InputError("unknown solver kind");
}

} // namespace stochdom
