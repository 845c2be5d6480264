#pragma once

#include "stochdom/fem.hpp"
#include "stochdom/sparse.hpp"

#include <array>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

namespace stochdom {

enum class LionsFlux {
    /// Neighbour flux n·A∇U taken from the adjacent element's gradient.
    Element,
    /// Neighbour flux recovered from its discrete Robin problem: g' = 2λU - g.
    /// Its fixed point is the monolithic P1 solution.
    Variational,
};

struct LionsConfig {
    double lambda = 5.0;
    int max_iterations = 33;
    /// Breakdown rows are kept every `record_stride` iterations (and at the last one).
    int record_stride = 1;
    LionsFlux flux = LionsFlux::Element;
    /// Stop once |IE| < 0.01 |DE| for three consecutive iterations.
    bool early_stop = false;
    /// Permits λ = 0 when every subdomain still has Dirichlet data.
    bool allow_zero_lambda = false;
    Exec exec = Exec::Parallel;
};

/// One Jacobi sweep's result together with the Robin data for the next sweep.
/// Data are stored per interface edge (index into LionsSolver::interface_edges())
/// and side, at the three Gauss points ordered from MeshEdge::a to b.
struct LionsIterate {
    int iteration = 0;
    /// Local vertex values per subdomain (numbering of LionsSolver::subdomain()).
    std::vector<std::vector<double>> u;
    /// Data to be received by the tri0 side (from tri1) and by the tri1 side (from tri0).
    std::vector<std::array<double, 3>> data0, data1;
};

struct LionsSubdomain {
    /// Local vertex index -> global vertex index, ascending.
    std::vector<int> vertices;
    std::vector<int> triangles;
    std::vector<char> dirichlet;
    /// Interface edges bounding this subdomain (indices into LionsSolver::interface_edges()).
    std::vector<int> interface_edges;
    int local(int global_vertex) const;
};

class LionsSolver {
public:
    /// Throws ConfigError for λ < 0, or λ = 0 without the override or with a
    /// subdomain lacking Dirichlet data; InputError for convection problems.
    LionsSolver(std::shared_ptr<const TriMesh> mesh, std::shared_ptr<const TransformedCoefficients> coeffs,
                LionsConfig config);
    ~LionsSolver();

    const TriMesh& mesh() const { return *mesh_; }
    const TransformedCoefficients& coeffs() const { return *coeffs_; }
    const LionsConfig& config() const { return config_; }
    int num_subdomains() const { return static_cast<int>(subs_.size()); }
    const LionsSubdomain& subdomain(int d) const { return subs_[d]; }
    /// Interface edge list as indices into TriMesh::edges.
    const std::vector<int>& interface_edges() const { return interface_; }

    /// Iteration 0 with zero values and zero Robin data.
    LionsIterate initial_iterate() const;
    /// Iteration 0 from a global P1 field: values restricted per subdomain,
    /// Robin data from the guess's fluxes (element traces, or the recovered
    /// discrete fluxes in Variational mode).
    LionsIterate initial_iterate(const Field& guess) const;
    LionsIterate step(const LionsIterate& prev) const;

    /// U_d on a triangle of subdomain d.
    double value(const LionsIterate& it, int tri, const std::array<double, 3>& bary) const;
    Vec2 gradient(const LionsIterate& it, int tri) const;
    /// n_side · A ∇U_side at Gauss point q of interface edge e (outward normal of that side).
    double outward_flux(const LionsIterate& it, int edge, int side, int q) const;
    double trace(const LionsIterate& it, int edge, int side, double s) const;
    /// Outward unit normal of the tri0 side of edge e.
    Vec2 normal(int edge) const;

    /// Σ_d (U_d, ψ̃)_d.
    double qoi(const LionsIterate& it) const;
    /// (Σ_d ||U_d - V_d||²_{H¹(Ω_d)})^½.
    double broken_h1_distance(const LionsIterate& a, const LionsIterate& b) const;
    double broken_h1_distance(const LionsIterate& a, const Field& global) const;

private:
    struct Local;
    std::shared_ptr<const TriMesh> mesh_;
    std::shared_ptr<const TransformedCoefficients> coeffs_;
    LionsConfig config_;
    std::vector<LionsSubdomain> subs_;
    std::vector<int> interface_;
    std::vector<std::unique_ptr<Local>> local_;

    std::array<std::array<double, 3>, 2> element_data(const LionsIterate& it, int edge) const;
    std::vector<double> solve_local(int d, const LionsIterate& it) const;
};

struct LionsBreakdown {
    int iteration = 0;
    double de = 0.0;
    double ie = 0.0;
    double ce = 0.0;
    /// de + ie + ce.
    double total = 0.0;
    double qoi = 0.0;
    std::optional<double> reference_error;
    std::optional<double> effectivity;
};

/// DE/IE/CE split of the QoI error at `curr` with the monolithic adjoint η.
/// The adjoint flux on interfaces is the two-sided average of A∇η.
LionsBreakdown lions_breakdown(const LionsSolver& solver, const LionsIterate& prev, const LionsIterate& curr,
                               const Field& adjoint, std::optional<double> reference_qoi = std::nullopt);

struct LionsRun {
    std::vector<LionsBreakdown> rows;
    LionsIterate last;
    bool early_stopped = false;
};

LionsRun run_lions(const LionsSolver& solver, const Field& adjoint, std::optional<double> reference_qoi = std::nullopt,
                   const LionsIterate* start = nullptr);

/// CSV with columns i,Q,DE,IE,CE,total,reference_error,effectivity.
void write_lions_csv(std::ostream& out, const std::vector<LionsBreakdown>& rows);

} // namespace stochdom
