#include "stochdom/problems.hpp"

#include "stochdom/error.hpp"

#include <cmath>

namespace stochdom {

double square_qoi_weight(const Vec2& x)
{
    const bool inside = x.x >= 0.5 && x.x <= 0.75 && x.y >= 0.5 && x.y <= 0.75;
    return inside ? 10.0 * x.x * x.y : 0.0;
}

std::shared_ptr<const ProblemData> poisson_square_data()
{
    auto d = std::make_shared<ProblemData>();
    d->diffusion = [](const Vec2&) { return Mat2::identity(); };
    d->source = [](const Vec2& x) { return 200.0 * x.x * (1.0 - x.x) + 200.0 * x.y * (1.0 - x.y); };
    d->convection = [](const Vec2&) { return Vec2{}; };
    d->qoi_weight = square_qoi_weight;
    return d;
}

std::shared_ptr<const ProblemData> convection_diffusion_square_data()
{
    auto d = std::make_shared<ProblemData>();
    d->diffusion = [](const Vec2&) { return Mat2::identity(); };
    d->source = [](const Vec2& x) { return 200.0 * std::sin(2.0 * M_PI * x.x) * std::sin(2.0 * M_PI * x.y); };
    d->convection = [](const Vec2&) { return Vec2{-80.0, 0.0}; };
    d->qoi_weight = square_qoi_weight;
    d->has_convection = true;
    return d;
}

std::shared_ptr<const ProblemData> custom_data(const Mat2& diffusion, const Vec2& convection)
{
    auto d = std::make_shared<ProblemData>();
    d->diffusion = [diffusion](const Vec2&) { return diffusion; };
    d->source = [](const Vec2& x) { return 200.0 * x.x * (1.0 - x.x) + 200.0 * x.y * (1.0 - x.y); };
    d->convection = [convection](const Vec2&) { return convection; };
    d->qoi_weight = square_qoi_weight;
    d->has_convection = convection.x != 0.0 || convection.y != 0.0;
    return d;
}

ProblemSetup square_setup(const std::string& preset)
{
    std::shared_ptr<const ProblemData> data;
    if (preset == "poisson-square") {
        data = poisson_square_data();
    } else if (preset == "convection-diffusion-square") {
        data = convection_diffusion_square_data();
    } else {
        throw InputError("unknown preset '" + preset + "'");
    }
    return ProblemSetup{preset, ReferenceDomain::unit_square(4), PartitionSpec{}, data, 0.08, 2};
}

} // namespace stochdom
