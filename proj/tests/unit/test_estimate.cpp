#include "stochdom/error.hpp"
#include "stochdom/estimate.hpp"
#include "stochdom/problems.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <sstream>

using namespace stochdom;

namespace {

std::shared_ptr<const Partition> square_partition()
{
    return std::make_shared<const Partition>(build_partition(ReferenceDomain::unit_square(4), PartitionSpec{}));
}

TransformedCoefficients identity_coeffs(std::shared_ptr<const ProblemData> data)
{
    AffineMapSet maps;
    maps.maps.resize(32);
    return TransformedCoefficients(std::move(data), maps);
}

std::shared_ptr<const ProblemData> sine_weight_data()
{
    auto d = std::make_shared<ProblemData>();
    d->diffusion = [](const Vec2&) { return Mat2::identity(); };
    d->source = [](const Vec2&) { return 1.0; };
    d->convection = [](const Vec2&) { return Vec2{}; };
    d->qoi_weight = [](const Vec2& x) {
        return 2.0 * M_PI * M_PI * std::sin(M_PI * x.x) * std::sin(M_PI * x.y);
    };
    return d;
}

TransformedCoefficients perturbed_coeffs(const std::shared_ptr<const Partition>& part,
                                         std::shared_ptr<const ProblemData> data, long long index)
{
    const auto s = sample_perturbation(PerturbationModel::uniform_box(16, 0.08), *part, 11, index);
    return TransformedCoefficients(std::move(data), affine_maps(*part, s), part);
}

} // namespace

TEST(Adjoint, P2ConvergesAtThirdOrder)
{
    auto part = square_partition();
    const auto tc = identity_coeffs(sine_weight_data());
    auto exact = [](const Vec2& x) { return std::sin(M_PI * x.x) * std::sin(M_PI * x.y); };
    auto grad = [](const Vec2& x) {
        return Vec2{M_PI * std::cos(M_PI * x.x) * std::sin(M_PI * x.y),
                    M_PI * std::sin(M_PI * x.x) * std::cos(M_PI * x.y)};
    };
    std::vector<double> l2;
    for (int level = 0; level < 3; ++level) {
        const auto space = make_space(uniform_mesh(*part, std::pow(0.5, level), 0), 2);
        l2.push_back(oracle::field_error(solve_adjoint(space, tc, false), exact, grad).l2);
    }
    for (int k = 1; k < 3; ++k) EXPECT_NEAR(std::log2(l2[k - 1] / l2[k]), 3.0, 0.3);
}

TEST(Estimate, VanishesForAdjointInPrimalSpace)
{
    auto part = square_partition();
    const auto space = make_space(uniform_mesh(*part, 1.0, 1), 1);
    for (const auto& data : {poisson_square_data(), convection_diffusion_square_data()}) {
        const auto tc = perturbed_coeffs(part, data, 4);
        const Field u = solve(assemble(space, tc, data->has_convection));
        const Field eta = solve_adjoint(space, tc, data->has_convection);
        const ErrorEstimate e = error_estimate(u, eta, tc, data->has_convection);
        const double scale = std::abs(qoi(u, tc));
        EXPECT_LE(std::abs(e.total), 1e-11 * scale);
    }
}

TEST(Estimate, IndicatorsSumToTotal)
{
    auto part = square_partition();
    const auto data = convection_diffusion_square_data();
    const auto tc = perturbed_coeffs(part, data, 9);
    const TriMesh mesh = uniform_mesh(*part, 1.0, 1);
    const auto p1 = make_space(mesh, 1), p2 = make_space(mesh, 2);
    const Field u = solve(assemble(p1, tc, true));
    const Field eta = solve_adjoint(p2, tc, true);
    const ErrorEstimate e = error_estimate(u, eta, tc, true);
    const IndicatorField ind = element_indicators(u, eta, tc, true);
    ASSERT_EQ(ind.size(), mesh.num_triangles());
    const double s = std::accumulate(ind.signed_values.begin(), ind.signed_values.end(), 0.0);
    EXPECT_NEAR(s, e.total, 1e-13 * ind.total());
    for (int k = 0; k < ind.size(); ++k) EXPECT_EQ(ind.values[k], std::abs(ind.signed_values[k]));
    EXPECT_GE(ind.total(), std::abs(e.total));
}

TEST(Estimate, SerialAndParallelAgree)
{
    auto part = square_partition();
    const auto data = poisson_square_data();
    const auto tc = perturbed_coeffs(part, data, 2);
    const TriMesh mesh = uniform_mesh(*part, 1.0, 2);
    const Field u = solve(assemble(make_space(mesh, 1), tc, false));
    const Field eta = solve_adjoint(make_space(mesh, 2), tc, false);
    const auto a = error_estimate(u, eta, tc, false, Exec::Serial), b = error_estimate(u, eta, tc, false, Exec::Parallel);
    EXPECT_EQ(a.total, b.total);
    EXPECT_EQ(element_indicators(u, eta, tc, false, Exec::Serial).signed_values,
              element_indicators(u, eta, tc, false, Exec::Parallel).signed_values);
}

TEST(Estimate, TracksReferenceError)
{
    auto part = square_partition();
    const auto data = poisson_square_data();
    const auto tc = perturbed_coeffs(part, data, 1);
    const TriMesh mesh = uniform_mesh(*part, 1.0, 2);
    const Field u = solve(assemble(make_space(mesh, 1), tc, false));
    const Field eta = solve_adjoint(make_space(mesh, 2), tc, false);
    const double q = qoi(u, tc);
    const double q_ref = reference_qoi(mesh, tc, false);
    const auto eff = effectivity(error_estimate(u, eta, tc, false).total, q_ref, q);
    ASSERT_TRUE(eff.has_value());
    EXPECT_GT(*eff, 0.8);
    EXPECT_LT(*eff, 1.2);
}

TEST(Estimate, RejectsMismatchedMeshes)
{
    auto part = square_partition();
    const auto tc = identity_coeffs(poisson_square_data());
    const Field u = solve(assemble(make_space(uniform_mesh(*part, 1.0, 0), 1), tc, false));
    const Field eta = solve_adjoint(make_space(uniform_mesh(*part, 1.0, 1), 2), tc, false);
    EXPECT_THROW(error_estimate(u, eta, tc, false), InputError);
    EXPECT_THROW(element_indicators(u, eta, tc, false), InputError);
}

TEST(Effectivity, EmptyForNegligibleError)
{
    EXPECT_FALSE(effectivity(1e-3, 1.0, 1.0 + 5e-15).has_value());
    const auto e = effectivity(2e-3, 1.001, 1.0);
    ASSERT_TRUE(e.has_value());
    EXPECT_NEAR(*e, 2.0, 1e-9);
}

TEST(Indicators, WriterFormat)
{
    IndicatorField f{{0.5, 0.25}, {-0.5, 0.25}};
    std::ostringstream out;
    write_indicators(out, f);
    std::istringstream in(out.str());
    int idx;
    double v, s;
    in >> idx >> v >> s;
    EXPECT_EQ(idx, 0);
    EXPECT_EQ(v, 0.5);
    EXPECT_EQ(s, -0.5);
}
