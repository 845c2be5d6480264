#pragma once

#include "stochdom/exec.hpp"
#include "stochdom/geometry.hpp"
#include "stochdom/mesh.hpp"
#include "stochdom/sparse.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <memory>
#include <vector>

namespace stochdom {

/// Continuous Lagrange space of degree 1 or 2. P2 dofs are the vertices
/// followed by the edges of build_edge_topology().
class FeSpace {
public:
    FeSpace(std::shared_ptr<const TriMesh> mesh, int degree);

    int degree() const { return degree_; }
    int num_dofs() const { return num_dofs_; }
    int dofs_per_element() const { return degree_ == 1 ? 3 : 6; }
    const TriMesh& mesh() const { return *mesh_; }
    const std::shared_ptr<const TriMesh>& mesh_ptr() const { return mesh_; }
    const EdgeTopology& topology() const { return topo_; }

    /// Local order: three vertices, then edges (v0v1, v1v2, v2v0) for P2.
    std::array<int, 6> element_dofs(int t) const;
    bool is_dirichlet(int dof) const { return dirichlet_[dof] != 0; }
    int num_free() const { return static_cast<int>(free_dofs_.size()); }
    const std::vector<int>& free_dofs() const { return free_dofs_; }
    /// Position of a dof in the free numbering, or -1 for Dirichlet dofs.
    int free_index(int dof) const { return free_index_[dof]; }
    Vec2 dof_point(int dof) const;

    /// Basis values and gradients on triangle t at barycentric point (l0, l1, l2).
    void basis(int t, const std::array<double, 3>& bary, double* phi, Vec2* grad) const;

private:
    std::shared_ptr<const TriMesh> mesh_;
    int degree_;
    int num_dofs_ = 0;
    EdgeTopology topo_;
    std::vector<char> dirichlet_;
    std::vector<int> free_dofs_;
    std::vector<int> free_index_;
};

std::shared_ptr<const FeSpace> make_space(const TriMesh& mesh, int degree);

/// Gradients of the barycentric coordinates of a triangle.
std::array<Vec2, 3> barycentric_gradients(const std::array<Vec2, 3>& c);

struct Field {
    std::shared_ptr<const FeSpace> space;
    std::vector<double> values;

    double value(int t, const std::array<double, 3>& bary) const;
    Vec2 gradient(int t, const std::array<double, 3>& bary) const;
};

Field interpolate(std::shared_ptr<const FeSpace> space, const std::function<double(const Vec2&)>& f);

struct LinearSystem {
    std::shared_ptr<const FeSpace> space;
    /// Free-dof block after Dirichlet row/column elimination.
    CsrMatrix matrix;
    std::vector<double> rhs;
    bool symmetric = true;
};

struct AssemblyOptions {
    /// Assembles the transposed operator (convection on the test gradient).
    bool transpose = false;
    Exec exec = Exec::Parallel;
};

/// Full operator over all dofs: entries ∫ A∇φ_j·∇φ_i + (b̂·∇φ_j) φ_i.
/// Throws AssemblyError when A is not SPD at a quadrature point.
CsrMatrix assemble_operator(const FeSpace& space, const TransformedCoefficients& coeffs, bool convection,
                            const AssemblyOptions& opt = {});

/// Mass matrix ∫ φ_j φ_i over all dofs.
CsrMatrix assemble_mass(const FeSpace& space);

/// ∫ g(d, y) φ_i over all dofs.
using SubdomainFunction = std::function<double(int d, const Vec2& y)>;
std::vector<double> assemble_load(const FeSpace& space, const SubdomainFunction& g, Exec exec = Exec::Parallel);

/// Restricts operator and load to the free dofs (homogeneous Dirichlet data).
LinearSystem eliminate_dirichlet(std::shared_ptr<const FeSpace> space, const CsrMatrix& full,
                                 const std::vector<double>& load);

/// Primal system with load ∫ F φ_i.
LinearSystem assemble(std::shared_ptr<const FeSpace> space, const TransformedCoefficients& coeffs, bool convection,
                      const AssemblyOptions& opt = {});

Field solve(const LinearSystem& system, const SolverOptions& opt = {}, SolveReport* report = nullptr);

/// Q = ∫ U ψ̃ dy.
double qoi(const Field& field, const TransformedCoefficients& coeffs, Exec exec = Exec::Serial);

struct SampleSolution {
    std::shared_ptr<const TransformedCoefficients> coeffs;
    Field field;
    double qoi = 0.0;
    SolveReport report;
};

/// affine_maps -> transform_coefficients -> assemble -> solve -> qoi. Errors are
/// rethrown as SampleError carrying the sample index.
SampleSolution solve_sample(const BoundarySample& sample, std::shared_ptr<const Partition> partition,
                            std::shared_ptr<const ProblemData> data, std::shared_ptr<const FeSpace> space,
                            const SolverOptions& opt = {}, Exec exec = Exec::Parallel);

struct ConditionEstimate {
    double value = 0.0;
    double lambda_max = 0.0;
    double lambda_min = 0.0;
    /// False when either iteration hit its cap; value is then a lower bound.
    bool converged = true;
    int iterations = 0;
};

/// λ_max / λ_min by power and inverse power iteration on a symmetric matrix.
ConditionEstimate condition_estimate(const CsrMatrix& a, double rel_tol = 1e-3, int max_iterations = 50000);

/// γ = λ₁ / (1 + λ₁) for the smallest Dirichlet eigenvalue of -Δ on the mesh (P1).
double poincare_factor(const TriMesh& mesh, double rel_tol = 1e-10);

/// `dof value` per line.
void write_field(std::ostream& out, const Field& field);
/// `row col value` per stored entry of the free-dof matrix.
void write_system(std::ostream& out, const LinearSystem& system);

} // namespace stochdom
