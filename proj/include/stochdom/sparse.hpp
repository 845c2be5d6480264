#pragma once

#include "stochdom/exec.hpp"

#include <memory>
#include <vector>

namespace stochdom {

struct Triplet {
    int row;
    int col;
    double value;
};

/// Compressed-row matrix with sorted column indices per row.
struct CsrMatrix {
    int rows = 0;
    int cols = 0;
    std::vector<int> row_ptr{0};
    std::vector<int> col;
    std::vector<double> val;

    /// Duplicates are summed in their input order, so the result is a pure
    /// function of the triplet sequence.
    static CsrMatrix from_triplets(int rows, int cols, std::vector<Triplet> triplets);
    static CsrMatrix identity(int n);

    int nnz() const { return static_cast<int>(val.size()); }
    double at(int r, int c) const;
    std::vector<double> diagonal() const;
    CsrMatrix transpose() const;
    /// max |a_ij - a_ji| relative to max |a_ij|.
    double max_asymmetry() const;
    bool is_symmetric(double rel_tol = 1e-12) const { return max_asymmetry() <= rel_tol; }

    void multiply(const std::vector<double>& x, std::vector<double>& y, Exec exec = Exec::Parallel) const;
    std::vector<double> operator*(const std::vector<double>& x) const;
};

double dot(const std::vector<double>& a, const std::vector<double>& b);
double norm2(const std::vector<double>& a);

enum class SolverKind {
    /// CG for symmetric matrices, sparse LU otherwise.
    Auto,
    CG,
    BiCGStab,
    Direct,
};

struct SolverOptions {
    SolverKind kind = SolverKind::Auto;
    double tol = 1e-10;
    /// 0 selects 10 * n + 100.
    int max_iterations = 0;
    Exec exec = Exec::Parallel;
};

struct SolveReport {
    SolverKind used = SolverKind::Auto;
    int iterations = 0;
    double relative_residual = 0.0;
    std::vector<double> residual_history;
};

/// Jacobi-preconditioned conjugate gradients; stops at ||r|| <= tol ||b||.
std::vector<double> pcg(const CsrMatrix& a, const std::vector<double>& b, const SolverOptions& opt,
                        SolveReport* report = nullptr);
std::vector<double> bicgstab(const CsrMatrix& a, const std::vector<double>& b, const SolverOptions& opt,
                             SolveReport* report = nullptr);
std::vector<double> direct_solve(const CsrMatrix& a, const std::vector<double>& b, SolveReport* report = nullptr);

std::vector<double> solve_linear(const CsrMatrix& a, const std::vector<double>& b, const SolverOptions& opt = {},
                                 SolveReport* report = nullptr);

/// Sparse factorization kept for repeated solves with one matrix.
class SparseFactorization {
public:
    explicit SparseFactorization(const CsrMatrix& a);
    ~SparseFactorization();
    SparseFactorization(SparseFactorization&&) noexcept;
    SparseFactorization& operator=(SparseFactorization&&) noexcept;

    std::vector<double> solve(const std::vector<double>& b) const;
    int size() const { return n_; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int n_ = 0;
};

} // namespace stochdom
