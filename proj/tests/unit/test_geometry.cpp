#include "stochdom/error.hpp"
#include "stochdom/geometry.hpp"
#include "stochdom/problems.hpp"

#include "oracles.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <map>

using namespace stochdom;

namespace {

Partition unit_square_partition() { return build_partition(ReferenceDomain::unit_square(4), PartitionSpec{}); }

Partition single_triangle_partition()
{
    Partition p;
    p.nodes = {{0, 0}, {1, 0}, {0, 1}};
    p.triangles = {{1, 2, 0}};
    p.touches_boundary = {true};
    p.boundary_index = {0, 1, 2};
    p.adjacency = {{}};
    p.num_boundary_nodes = 3;
    return p;
}

BoundarySample manual_sample(std::vector<Vec2> displacements, const Partition& p)
{
    BoundarySample s;
    s.index = 1;
    s.displacements = std::move(displacements);
    s.perturbed_nodes.resize(p.num_boundary_nodes);
    for (int i = 0; i < static_cast<int>(p.nodes.size()); ++i) {
        const int j = p.boundary_index[i];
        if (j >= 0) s.perturbed_nodes[j] = p.nodes[i] + s.displacements[j];
    }
    return s;
}

Vec2 random_point_in(const std::array<Vec2, 3>& c, oracle::SplitMix& rng)
{
    double a = rng.uniform(), b = rng.uniform();
    if (a + b > 1.0) {
        a = 1.0 - a;
        b = 1.0 - b;
    }
    return (1.0 - a - b) * c[0] + a * c[1] + b * c[2];
}

} // namespace

TEST(ReferenceDomain, RejectsClockwiseAndSelfIntersecting)
{
    EXPECT_THROW(ReferenceDomain({{0, 0}, {0, 1}, {1, 0}}), InputError);
    EXPECT_THROW(ReferenceDomain({{0, 0}, {1, 1}, {1, 0}, {0, 1}}), InputError);
    EXPECT_THROW(ReferenceDomain({{0, 0}, {1, 0}}), InputError);
    EXPECT_NO_THROW(ReferenceDomain({{0, 0}, {1, 0}, {0, 1}}));
}

TEST(ReferenceDomain, UnitSquareNodes)
{
    const auto r = ReferenceDomain::unit_square(4);
    EXPECT_EQ(r.num_boundary_nodes(), 16);
    EXPECT_NEAR(r.area(), 1.0, 1e-15);
    EXPECT_GT(polygon_signed_area(r.boundary_nodes()), 0.0);
}

TEST(Sampling, ZeroWidthGivesReferencePolygon)
{
    const Partition p = unit_square_partition();
    const auto model = PerturbationModel::degenerate(16);
    for (long long n : {1LL, 2LL, 77LL}) {
        const auto s = sample_perturbation(model, p, 12345, n);
        for (int j = 0; j < 16; ++j) {
            EXPECT_EQ(s.displacements[j].x, 0.0);
            EXPECT_EQ(s.displacements[j].y, 0.0);
            EXPECT_EQ(s.perturbed_nodes[j], ReferenceDomain::unit_square(4).boundary_nodes()[j]);
        }
    }
}

TEST(Sampling, DisplacementsStayInBox)
{
    const Partition p = unit_square_partition();
    const auto model = PerturbationModel::uniform_box(16, 0.08);
    for (long long n = 1; n <= 200; ++n) {
        const auto s = sample_perturbation(model, p, 0, n);
        for (const auto& d : s.displacements) {
            EXPECT_LE(std::abs(d.x), 0.08);
            EXPECT_LE(std::abs(d.y), 0.08);
        }
        EXPECT_LE(s.magnitude(), 0.08 * std::sqrt(2.0));
    }
}

TEST(Sampling, DeterministicInSeedAndIndex)
{
    const Partition p = unit_square_partition();
    const auto model = PerturbationModel::uniform_box(16, 0.08);
    const auto a = sample_perturbation(model, p, 5, 9);
    sample_perturbation(model, p, 5, 10);
    const auto b = sample_perturbation(model, p, 5, 9);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, sample_perturbation(model, p, 6, 9));
    EXPECT_NE(a, sample_perturbation(model, p, 5, 8));
}

TEST(Sampling, ImpossibleBoundsRaiseSamplingError)
{
    const Partition p = unit_square_partition();
    auto model = PerturbationModel::uniform_box(16, 0.08);
    model.jacobian_lower = 1.5;
    model.jacobian_upper = 2.0;
    model.max_retries = 5;
    try {
        sample_perturbation(model, p, 0, 3);
        FAIL() << "expected SamplingError";
    } catch (const SamplingError& e) {
        EXPECT_EQ(e.index, 3);
        EXPECT_EQ(e.retries, 5);
    }
}

TEST(Partition, AreaCoverAdjacencyAndInteriorFlags)
{
    for (const auto& [ref, spec] :
         std::vector<std::pair<ReferenceDomain, PartitionSpec>>{
             {ReferenceDomain::unit_square(4), PartitionSpec{}},
             {ReferenceDomain::unit_square(3), PartitionSpec{PartitionSpec::Kind::Ring, 0, 0, 0.25}},
             {ReferenceDomain({{0, 0}, {2, 0}, {2.5, 1}, {1, 2}, {-0.5, 1}}),
              PartitionSpec{PartitionSpec::Kind::Ring, 0, 0, 0.3}}}) {
        const Partition p = build_partition(ref, spec);
        double total = 0.0;
        for (int d = 0; d < p.size(); ++d) {
            EXPECT_GT(p.area(d), 0.0);
            total += p.area(d);
            for (int e : p.adjacency[d]) {
                const auto& back = p.adjacency[e];
                EXPECT_TRUE(std::binary_search(back.begin(), back.end(), d));
            }
            bool on_boundary = false;
            for (int v : p.triangles[d]) on_boundary = on_boundary || p.boundary_index[v] >= 0;
            EXPECT_EQ(static_cast<bool>(p.touches_boundary[d]), on_boundary);
        }
        EXPECT_NEAR(total, ref.area(), 1e-12 * ref.area());
        for (int j = 0; j < ref.num_boundary_nodes(); ++j) {
            EXPECT_NE(std::find(p.boundary_index.begin(), p.boundary_index.end(), j), p.boundary_index.end());
        }
    }
}

TEST(Partition, SquareGridHasUntouchedCore)
{
    const Partition p = unit_square_partition();
    EXPECT_EQ(p.size(), 32);
    int interior = 0;
    for (int d = 0; d < p.size(); ++d) interior += !p.touches_boundary[d];
    EXPECT_EQ(interior, 8);
}

TEST(AffineMaps, ZeroDisplacementIsIdentity)
{
    const Partition p = unit_square_partition();
    const auto maps = affine_maps(p, sample_perturbation(PerturbationModel::degenerate(16), p, 0, 1));
    for (const auto& m : maps.maps) {
        EXPECT_EQ(m.jacobian, Mat2::identity());
        EXPECT_EQ(m.det, 1.0);
        EXPECT_EQ(m.to_reference(Vec2{0.3, 0.7}), (Vec2{0.3, 0.7}));
    }
}

TEST(AffineMaps, StretchedTriangleByHand)
{
    const Partition p = single_triangle_partition();
    const auto maps = affine_maps(p, manual_sample({{0, 0}, {1, 0}, {0, 0}}, p));
    const AffineMap& m = maps.maps[0];
    EXPECT_NEAR(m.jacobian.a11, 0.5, 1e-15);
    EXPECT_NEAR(m.jacobian.a12, 0.0, 1e-15);
    EXPECT_NEAR(m.jacobian.a21, 0.0, 1e-15);
    EXPECT_NEAR(m.jacobian.a22, 1.0, 1e-15);
    EXPECT_NEAR(m.det, 0.5, 1e-15);
    EXPECT_NEAR(operator_norm(m.jacobian), 1.0, 1e-15);
    EXPECT_NEAR(operator_norm(m.inverse), 2.0, 1e-15);
    const auto r = m.to_reference(Vec2{2, 0});
    EXPECT_NEAR(r.x, 1.0, 1e-15);
    EXPECT_NEAR(r.y, 0.0, 1e-15);
}

TEST(AffineMaps, CollapsedTriangleRaisesDegeneracy)
{
    const Partition p = single_triangle_partition();
    EXPECT_THROW(affine_maps(p, manual_sample({{0, 0}, {-1, 1}, {0, 0}}, p)), DegeneracyError);
}

TEST(ValidateJacobians, IdentityAndViolation)
{
    AffineMapSet id;
    id.maps.resize(4);
    const auto r = validate_jacobians(id, 0.5, 2.0);
    EXPECT_TRUE(r.passed);
    EXPECT_EQ(r.min_abs_det, 1.0);
    EXPECT_EQ(r.max_abs_det, 1.0);

    AffineMapSet half = id;
    half.maps[2].jacobian = Mat2::diag(0.5, 1.0);
    half.maps[2].inverse = Mat2::diag(2.0, 1.0);
    half.maps[2].det = 0.5;
    half.maps[2].identity = false;
    const auto f = validate_jacobians(half, 0.6, 2.0);
    EXPECT_FALSE(f.passed);
    ASSERT_EQ(f.violating.size(), 1u);
    EXPECT_EQ(f.violating[0], 2);
    EXPECT_NEAR(f.max_norm, 1.0, 1e-15);
    EXPECT_NEAR(f.max_inverse_norm, 2.0, 1e-15);
}

TEST(TransformedCoefficients, DiagonalStretchByHand)
{
    const Partition p = single_triangle_partition();
    // Perturbed triangle (0,0),(0.5,0),(0,1) maps to the reference with J = diag(2, 1).
    const auto maps = affine_maps(p, manual_sample({{0, 0}, {-0.5, 0}, {0, 0}}, p));
    EXPECT_NEAR(maps.maps[0].det, 2.0, 1e-15);
    auto data = std::make_shared<ProblemData>(*poisson_square_data());
    const TransformedCoefficients tc(data, maps);
    const Mat2 a = tc.diffusion(0, {0.2, 0.3});
    EXPECT_NEAR(a.a11, 2.0, 1e-15);
    EXPECT_NEAR(a.a22, 0.5, 1e-15);
    EXPECT_NEAR(a.a12, 0.0, 1e-15);
    EXPECT_NEAR(a.a21, 0.0, 1e-15);
}

TEST(TransformedCoefficients, ConvectionUnderIdentity)
{
    const Partition p = unit_square_partition();
    const auto maps = affine_maps(p, sample_perturbation(PerturbationModel::degenerate(16), p, 0, 1));
    const TransformedCoefficients tc(convection_diffusion_square_data(), maps);
    EXPECT_EQ(tc.convection(5, {0.4, 0.4}), (Vec2{-80.0, 0.0}));
}

TEST(TransformedCoefficients, LocateOutsideRaisesDomainError)
{
    auto part = std::make_shared<const Partition>(unit_square_partition());
    const auto maps = affine_maps(*part, sample_perturbation(PerturbationModel::degenerate(16), *part, 0, 1));
    const TransformedCoefficients tc(poisson_square_data(), maps, part);
    EXPECT_THROW(tc.locate({1.5, 0.5}), DomainError);
    const int d = tc.locate({0.1, 0.05});
    EXPECT_GE(d, 0);
    EXPECT_LT(d, part->size());
}

TEST(Shape, EquilateralDiameters)
{
    const std::array<Vec2, 3> t{Vec2{0, 0}, Vec2{1, 0}, Vec2{0.5, std::sqrt(3.0) / 2}};
    EXPECT_NEAR(triangle_diameter(t), 1.0, 1e-15);
    EXPECT_NEAR(triangle_inscribed_diameter(t), std::sqrt(3.0) / 3.0, 1e-15);
}

TEST(Shape, IdentityMapsConstantRatio)
{
    const Partition p = unit_square_partition();
    const auto s = sample_perturbation(PerturbationModel::degenerate(16), p, 0, 1);
    const double gamma = 0.9;
    const ShapeReport r = shape_report(p, s, *poisson_square_data(), gamma);
    double worst = 0.0;
    for (int d = 0; d < p.size(); ++d) {
        EXPECT_GT(r.rho[d], 0.0);
        EXPECT_LE(r.rho[d], r.kappa[d]);
        worst = std::max(worst, r.kappa[d] / r.rho[d]);
    }
    // C1 = max(κ/ρ)⁴ and C2 = γ / max(κ/ρ)⁴, so the ratio carries the eighth power.
    EXPECT_NEAR(r.continuity / r.coercivity, std::pow(worst, 8) / gamma, 1e-9 * std::pow(worst, 8) / gamma);
    EXPECT_GE(r.continuity, r.coercivity);
}

TEST(Shape, FlattenedLayerReportsLargeAspect)
{
    const Partition p = build_partition(ReferenceDomain::unit_square(4), PartitionSpec{});
    std::vector<Vec2> d(16, Vec2{0, 0});
    // Push the bottom-side interior nodes up toward the first grid row.
    for (int j = 1; j <= 3; ++j) d[j] = {0.0, 0.23};
    const ShapeReport r = shape_report(p, manual_sample(d, p), *poisson_square_data(), 0.9);
    EXPECT_GT(r.max_aspect_perturbed, 15.0);
}

// Property suites over random admissible samples.

class GeometryProperties : public ::testing::TestWithParam<PartitionSpec::Kind> {
protected:
    Partition partition() const
    {
        if (GetParam() == PartitionSpec::Kind::Grid) return unit_square_partition();
        return build_partition(ReferenceDomain({{0, 0}, {1, 0}, {1.4, 0.8}, {0.6, 1.3}, {-0.2, 0.9}}),
                               PartitionSpec{PartitionSpec::Kind::Ring, 0, 0, 0.25});
    }
};

TEST_P(GeometryProperties, RoundTripContinuityDetIdentitySymmetry)
{
    const Partition p = partition();
    const auto model = PerturbationModel::uniform_box(p.num_boundary_nodes, 0.05);
    auto data = std::make_shared<ProblemData>();
    data->diffusion = [](const Vec2& x) { return Mat2{2.0 + x.x, 0.3 * x.y, 0.3 * x.y, 1.0 + x.y * x.y}; };
    data->source = [](const Vec2&) { return 1.0; };
    data->convection = [](const Vec2&) { return Vec2{}; };
    data->qoi_weight = [](const Vec2&) { return 1.0; };
    oracle::SplitMix rng(2024);
    for (long long n = 1; n <= 20; ++n) {
        const auto s = sample_perturbation(model, p, 77, n);
        const auto maps = affine_maps(p, s);
        const auto moved = p.perturbed_nodes(s);
        const TransformedCoefficients tc(data, maps);
        for (int d = 0; d < p.size(); ++d) {
            const AffineMap& m = maps.maps[d];
            const auto ref = p.corners(d);
            for (int k = 0; k < 100; ++k) {
                const Vec2 y = random_point_in(ref, rng);
                const Vec2 back = m.to_reference(m.to_physical(y));
                EXPECT_NEAR(back.x, y.x, 1e-12);
                EXPECT_NEAR(back.y, y.y, 1e-12);
                const Mat2 a = tc.diffusion(d, y);
                EXPECT_LE(std::abs(a.a12 - a.a21), 1e-14 * std::max(1.0, max_abs_entry(a)));
            }
            const auto phys = p.perturbed_corners(d, moved);
            const double phys_area = 0.5 * orient(phys[0], phys[1], phys[2]);
            EXPECT_NEAR(std::abs(m.det) * phys_area, p.area(d), 1e-12 * p.area(d));
            for (int k = 0; k < 3; ++k) {
                const Vec2 r = m.to_reference(phys[k]);
                EXPECT_NEAR(r.x, ref[k].x, 1e-12);
                EXPECT_NEAR(r.y, ref[k].y, 1e-12);
            }
        }
        // Adjacent maps agree along shared edges (reference-to-physical direction).
        for (int d = 0; d < p.size(); ++d) {
            for (int e : p.adjacency[d]) {
                std::vector<int> shared;
                for (int v : p.triangles[d]) {
                    for (int w : p.triangles[e]) {
                        if (v == w) shared.push_back(v);
                    }
                }
                ASSERT_EQ(shared.size(), 2u);
                for (int k = 0; k <= 10; ++k) {
                    const double t = k / 10.0;
                    const Vec2 y = (1.0 - t) * p.nodes[shared[0]] + t * p.nodes[shared[1]];
                    const Vec2 xd = maps.maps[d].to_physical(y), xe = maps.maps[e].to_physical(y);
                    EXPECT_NEAR(xd.x, xe.x, 1e-12);
                    EXPECT_NEAR(xd.y, xe.y, 1e-12);
                }
            }
        }
    }
}

TEST_P(GeometryProperties, IdentityCollapse)
{
    const Partition p = partition();
    const auto s = sample_perturbation(PerturbationModel::degenerate(p.num_boundary_nodes), p, 1, 1);
    const auto data = convection_diffusion_square_data();
    const TransformedCoefficients tc(data, affine_maps(p, s));
    oracle::SplitMix rng(7);
    for (int d = 0; d < p.size(); ++d) {
        for (int k = 0; k < 10; ++k) {
            const Vec2 y = random_point_in(p.corners(d), rng);
            EXPECT_EQ(tc.diffusion(d, y), data->diffusion(y));
            EXPECT_EQ(tc.source(d, y), data->source(y));
            EXPECT_EQ(tc.convection(d, y), data->convection(y));
            EXPECT_EQ(tc.qoi_weight(d, y), data->qoi_weight(y));
        }
    }
}

INSTANTIATE_TEST_SUITE_P(Partitions, GeometryProperties,
                         ::testing::Values(PartitionSpec::Kind::Grid, PartitionSpec::Kind::Ring));
