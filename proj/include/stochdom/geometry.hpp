#pragma once

#include "stochdom/small_matrix.hpp"

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <vector>

namespace stochdom {

/// Fixed polygon every realization is mapped back to. Nodes are counter-clockwise.
class ReferenceDomain {
public:
    /// Validates simplicity, orientation and J >= 3; throws InputError otherwise.
    explicit ReferenceDomain(std::vector<Vec2> boundary_nodes);

    static ReferenceDomain unit_square(int nodes_per_side);

    const std::vector<Vec2>& boundary_nodes() const { return nodes_; }
    int num_boundary_nodes() const { return static_cast<int>(nodes_.size()); }
    double area() const;
    Vec2 centroid() const;

private:
    std::vector<Vec2> nodes_;
};

double polygon_signed_area(const std::vector<Vec2>& polygon);
bool polygon_is_simple(const std::vector<Vec2>& polygon);
bool point_in_polygon(const std::vector<Vec2>& polygon, const Vec2& p);

/// Per-node uniform boxes [-w, w] around each reference boundary node, plus the
/// admissibility limits enforced by rejection.
struct PerturbationModel {
    std::vector<Vec2> half_widths;

    double jacobian_lower = 0.25;
    double jacobian_upper = 4.0;
    int max_retries = 100;

    /// Envelope scalings about the centroid for the reported Ω_* ⊆ Ω(θ) ⊆ Ω* check.
    double inner_scale = 0.5;
    double outer_scale = 1.5;

    static PerturbationModel uniform_box(int num_nodes, double half_width);
    static PerturbationModel degenerate(int num_nodes);

    bool is_degenerate() const;
    /// Throws InputError when widths are negative/non-finite or bounds are inconsistent.
    void validate(int num_nodes) const;
};

struct BoundarySample {
    long long index = 0;
    std::vector<Vec2> displacements;
    std::vector<Vec2> perturbed_nodes;
    /// Number of redraws before this sample was accepted.
    int rejections = 0;
    /// Reported only, never enforced.
    bool envelope_ok = true;

    /// max_j |θ_j|.
    double magnitude() const;
    friend bool operator==(const BoundarySample&, const BoundarySample&) = default;
};

struct PartitionSpec {
    enum class Kind {
        /// Axis-aligned rectangle split into a cells_x × cells_y grid of diagonal-cut
        /// squares; boundary nodes must be the grid's boundary points.
        Grid,
        /// Any polygon star-shaped about its centroid: one ring of 2J triangles of
        /// relative depth `ring_depth`, and a fan-triangulated core.
        Ring,
    };
    Kind kind = Kind::Grid;
    int cells_x = 4;
    int cells_y = 4;
    double ring_depth = 0.25;
};

/// Coarse triangulation of the reference domain carrying the piecewise-affine maps.
struct Partition {
    std::vector<Vec2> nodes;
    /// Counter-clockwise; the first two vertices span the longest edge.
    std::vector<std::array<int, 3>> triangles;
    std::vector<bool> touches_boundary;
    /// For each node, the reference boundary node index j, or -1 for interior nodes.
    std::vector<int> boundary_index;
    /// Edge-sharing neighbours of each subdomain, sorted ascending.
    std::vector<std::vector<int>> adjacency;
    int num_boundary_nodes = 0;

    int size() const { return static_cast<int>(triangles.size()); }
    double area(int d) const;
    double total_area() const;
    /// Partition nodes after displacing the boundary nodes by the sample.
    std::vector<Vec2> perturbed_nodes(const BoundarySample& sample) const;
    std::array<Vec2, 3> corners(int d) const;
    std::array<Vec2, 3> perturbed_corners(int d, const std::vector<Vec2>& moved) const;
};

Partition build_partition(const ReferenceDomain& reference, const PartitionSpec& spec);

/// φ(x) = J (x - r) + s, mapping a perturbed subdomain onto its reference triangle.
struct AffineMap {
    Mat2 jacobian = Mat2::identity();
    Mat2 inverse = Mat2::identity();
    double det = 1.0;
    Vec2 physical_anchor{};
    Vec2 reference_anchor{};
    bool identity = true;

    Vec2 to_reference(const Vec2& x) const { return jacobian * (x - physical_anchor) + reference_anchor; }
    Vec2 to_physical(const Vec2& y) const { return inverse * (y - reference_anchor) + physical_anchor; }
};

struct AffineMapSet {
    long long sample_index = 0;
    std::vector<AffineMap> maps;
};

/// Throws DegeneracyError when a perturbed subdomain has (near) zero or inverted area.
AffineMapSet affine_maps(const Partition& partition, const BoundarySample& sample);

struct JacobianReport {
    double min_abs_det = 0.0;
    double max_abs_det = 0.0;
    double max_norm = 0.0;
    double max_inverse_norm = 0.0;
    bool passed = true;
    std::vector<int> violating;
};

JacobianReport validate_jacobians(const AffineMapSet& maps, double m_lower, double m_upper);

/// Physical problem data, evaluable on the outer envelope Ω*.
struct ProblemData {
    std::function<Mat2(const Vec2&)> diffusion;
    std::function<double(const Vec2&)> source;
    std::function<Vec2(const Vec2&)> convection;
    std::function<double(const Vec2&)> qoi_weight;
    bool has_convection = false;
};

/// Problem data pulled back to the reference domain, subdomain by subdomain.
/// Only point-wise inverse maps are applied; Ω(θ) is never meshed.
class TransformedCoefficients {
public:
    TransformedCoefficients(std::shared_ptr<const ProblemData> data, AffineMapSet maps,
                            std::shared_ptr<const Partition> partition = nullptr);

    /// A = |det J|⁻¹ J a(φ⁻¹ y) Jᵀ
    Mat2 diffusion(int d, const Vec2& y) const;
    /// F = |det J|⁻¹ f(φ⁻¹ y)
    double source(int d, const Vec2& y) const;
    /// b̂ = |det J|⁻¹ J b(φ⁻¹ y)
    Vec2 convection(int d, const Vec2& y) const;
    /// ψ̃ = |det J|⁻¹ ψ(φ⁻¹ y)
    double qoi_weight(int d, const Vec2& y) const;

    /// Subdomain containing y; requires the partition. Throws DomainError outside Ω.
    int locate(const Vec2& y) const;

    bool has_convection() const { return data_->has_convection; }
    int num_subdomains() const { return static_cast<int>(maps_.maps.size()); }
    const AffineMapSet& maps() const { return maps_; }
    const ProblemData& data() const { return *data_; }
    std::shared_ptr<const ProblemData> data_ptr() const { return data_; }

private:
    std::shared_ptr<const ProblemData> data_;
    AffineMapSet maps_;
    std::shared_ptr<const Partition> partition_;
};

TransformedCoefficients transform_coefficients(std::shared_ptr<const ProblemData> data, const AffineMapSet& maps,
                                               std::shared_ptr<const Partition> partition = nullptr);

/// Longest side.
double triangle_diameter(const std::array<Vec2, 3>& t);
/// Inscribed-circle diameter 2·area/semi-perimeter.
double triangle_inscribed_diameter(const std::array<Vec2, 3>& t);

struct ShapeReport {
    std::vector<double> kappa, rho, kappa_perturbed, rho_perturbed;
    double max_aspect_perturbed = 0.0;
    double a_min = 0.0;
    double a_max = 0.0;
    double gamma = 0.0;
    double continuity = 0.0;
    double coercivity = 0.0;
    double h1_amplification = 0.0;
};

ShapeReport shape_report(const Partition& partition, const BoundarySample& sample, const ProblemData& data,
                         double gamma);

/// Draws θ for sample `index` under `master_seed`, redrawing from successive
/// sub-streams until the perturbed polygon is simple and every Jacobian lies in
/// [jacobian_lower, jacobian_upper]. Throws SamplingError after max_retries.
BoundarySample sample_perturbation(const PerturbationModel& model, const Partition& partition,
                                   std::uint64_t master_seed, long long index);

} // namespace stochdom
