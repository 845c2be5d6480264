#pragma once

#include "stochdom/fem.hpp"
#include "stochdom/mesh.hpp"

#include <iosfwd>
#include <optional>

namespace stochdom {

/// Solves ∫ A∇η·∇v + (b̂·∇v) η = ∫ ψ̃ v for all v, η = 0 on ∂Ω, in `space`
/// (normally P2 on the primal mesh). The matrix is the transposed primal operator.
Field solve_adjoint(std::shared_ptr<const FeSpace> space, const TransformedCoefficients& coeffs, bool convection,
                    const SolverOptions& opt = {}, SolveReport* report = nullptr, Exec exec = Exec::Parallel);

struct ErrorEstimate {
    double total = 0.0;
    long long sample_index = 0;
    std::optional<double> reference_error;
    std::optional<double> effectivity;
};

/// ℰ = ∫ F η − A∇U·∇η − (b̂·∇U) η. Throws InputError when the fields live on different meshes.
ErrorEstimate error_estimate(const Field& primal, const Field& adjoint, const TransformedCoefficients& coeffs,
                             bool convection, Exec exec = Exec::Parallel);

/// Per-element |contribution| with the signed contributions kept alongside.
IndicatorField element_indicators(const Field& primal, const Field& adjoint, const TransformedCoefficients& coeffs,
                                  bool convection, Exec exec = Exec::Parallel);

/// ℰ / (Q_ref − Q); empty when |Q_ref − Q| < 1e-14.
std::optional<double> effectivity(double estimate, double reference_qoi, double computed_qoi);

/// QoI of a P2 solve on `mesh` refined by `sweeps` uniform sweeps (two bisections each).
double reference_qoi(const TriMesh& mesh, const TransformedCoefficients& coeffs, bool convection, int sweeps = 2,
                     const SolverOptions& opt = {});

/// `index E_K signed` per line.
void write_indicators(std::ostream& out, const IndicatorField& indicators);

} // namespace stochdom
