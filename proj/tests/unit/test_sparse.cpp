#include "stochdom/error.hpp"
#include "stochdom/sparse.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace stochdom;

namespace {

/// 1D Laplacian plus an optional first-order term, n unknowns.
CsrMatrix tridiagonal(int n, double skew = 0.0)
{
    std::vector<Triplet> t;
    for (int i = 0; i < n; ++i) {
        t.push_back({i, i, 2.0});
        if (i > 0) t.push_back({i, i - 1, -1.0 - skew});
        if (i + 1 < n) t.push_back({i, i + 1, -1.0 + skew});
    }
    return CsrMatrix::from_triplets(n, n, t);
}

double residual(const CsrMatrix& a, const std::vector<double>& x, const std::vector<double>& b)
{
    auto r = a * x;
    for (std::size_t i = 0; i < r.size(); ++i) r[i] -= b[i];
    return norm2(r) / norm2(b);
}

} // namespace

TEST(Csr, DuplicatesSummedAndSorted)
{
    const CsrMatrix m = CsrMatrix::from_triplets(2, 3, {{1, 2, 1.0}, {0, 1, 2.0}, {1, 0, 3.0}, {1, 2, 0.5}});
    EXPECT_EQ(m.nnz(), 3);
    EXPECT_EQ(m.at(1, 2), 1.5);
    EXPECT_EQ(m.at(0, 1), 2.0);
    EXPECT_EQ(m.at(0, 0), 0.0);
    EXPECT_EQ(m.col, (std::vector<int>{1, 0, 2}));
    const CsrMatrix t = m.transpose();
    EXPECT_EQ(t.rows, 3);
    EXPECT_EQ(t.at(2, 1), 1.5);
}

TEST(Csr, SymmetryMeasure)
{
    EXPECT_TRUE(tridiagonal(10).is_symmetric());
    EXPECT_FALSE(tridiagonal(10, 0.3).is_symmetric());
    EXPECT_NEAR(tridiagonal(10, 0.25).max_asymmetry(), 0.25, 1e-15);
}

TEST(Csr, ParallelMultiplyMatchesSerialBitwise)
{
    oracle::SplitMix rng(5);
    std::vector<Triplet> t;
    const int n = 3000;
    for (int k = 0; k < 20 * n; ++k) t.push_back({rng.integer(0, n - 1), rng.integer(0, n - 1), rng.uniform(-1, 1)});
    const CsrMatrix a = CsrMatrix::from_triplets(n, n, t);
    std::vector<double> x(n), ys, yp;
    for (auto& v : x) v = rng.uniform(-1, 1);
    a.multiply(x, ys, Exec::Serial);
    a.multiply(x, yp, Exec::Parallel);
    EXPECT_EQ(ys, yp);
}

TEST(Solvers, IdentitySystemReturnsRhs)
{
    const std::vector<double> r{1.0, -2.0, 3.5, 0.25};
    const CsrMatrix id = CsrMatrix::identity(4);
    for (SolverKind k : {SolverKind::Auto, SolverKind::CG, SolverKind::BiCGStab, SolverKind::Direct}) {
        SolverOptions o;
        o.kind = k;
        const auto x = solve_linear(id, r, o);
        for (int i = 0; i < 4; ++i) EXPECT_NEAR(x[i], r[i], 1e-14);
    }
}

TEST(Solvers, AllKindsReachTolerance)
{
    const int n = 200;
    std::vector<double> b(n);
    for (int i = 0; i < n; ++i) b[i] = std::sin(0.1 * i) + 1.0;
    const CsrMatrix spd = tridiagonal(n), ns = tridiagonal(n, 0.4);
    SolveReport rep;
    SolverOptions o;
    o.kind = SolverKind::CG;
    auto x = solve_linear(spd, b, o, &rep);
    EXPECT_LE(rep.relative_residual, 1e-10);
    EXPECT_LE(residual(spd, x, b), 1e-9);
    EXPECT_FALSE(rep.residual_history.empty());
    o.kind = SolverKind::BiCGStab;
    x = solve_linear(ns, b, o, &rep);
    EXPECT_LE(residual(ns, x, b), 1e-9);
    o.kind = SolverKind::Direct;
    x = solve_linear(ns, b, o, &rep);
    EXPECT_LE(residual(ns, x, b), 1e-12);
    o.kind = SolverKind::Auto;
    solve_linear(ns, b, o, &rep);
    EXPECT_EQ(rep.used, SolverKind::Direct);
    solve_linear(spd, b, o, &rep);
    EXPECT_EQ(rep.used, SolverKind::CG);
}

TEST(Solvers, IterationCapRaisesWithHistory)
{
    const int n = 400;
    std::vector<double> b(n, 1.0);
    SolverOptions o;
    o.kind = SolverKind::CG;
    o.max_iterations = 3;
    try {
        solve_linear(tridiagonal(n), b, o);
        FAIL() << "expected SolverError";
    } catch (const SolverError& e) {
        EXPECT_EQ(e.residual_history.size(), 4u);
    }
}

TEST(Solvers, RepeatedSolveIsDeterministic)
{
    const int n = 300;
    std::vector<double> b(n);
    for (int i = 0; i < n; ++i) b[i] = std::cos(0.37 * i);
    const auto x1 = solve_linear(tridiagonal(n), b), x2 = solve_linear(tridiagonal(n), b);
    EXPECT_EQ(x1, x2);
    SolverOptions serial;
    serial.exec = Exec::Serial;
    EXPECT_EQ(solve_linear(tridiagonal(n), b, serial), x1);
}

TEST(Factorization, ReusableSolves)
{
    const CsrMatrix a = tridiagonal(50, 0.2);
    const SparseFactorization f(a);
    for (int k = 0; k < 3; ++k) {
        std::vector<double> b(50, 1.0 + k);
        EXPECT_LE(residual(a, f.solve(b), b), 1e-13);
    }
}
