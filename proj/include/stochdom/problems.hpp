#pragma once

#include "stochdom/geometry.hpp"

#include <memory>
#include <string>

namespace stochdom {

/// a = I, f = 200x(1-x) + 200y(1-y), ψ = 10xy on [0.5, 0.75]².
std::shared_ptr<const ProblemData> poisson_square_data();
/// a = I, f = 200 sin(2πx) sin(2πy), b = (-80, 0), ψ as in the Poisson problem.
std::shared_ptr<const ProblemData> convection_diffusion_square_data();
/// Poisson source and weight with constant diffusion and optional constant convection.
std::shared_ptr<const ProblemData> custom_data(const Mat2& diffusion, const Vec2& convection);

/// 10xy on [0.5, 0.75]², zero elsewhere.
double square_qoi_weight(const Vec2& x);

struct ProblemSetup {
    std::string name;
    ReferenceDomain reference;
    PartitionSpec partition;
    std::shared_ptr<const ProblemData> data;
    double half_width = 0.08;
    /// Uniform sweeps applied to the partition before h_tilde scaling.
    int base_levels = 2;
};

/// "poisson-square" or "convection-diffusion-square".
ProblemSetup square_setup(const std::string& preset);

} // namespace stochdom
