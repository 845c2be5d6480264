#include "stochdom/geometry.hpp"

#include "stochdom/error.hpp"
#include "stochdom/rng.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numeric>
#include <string>

namespace stochdom {

namespace {

bool segments_intersect(const Vec2& p1, const Vec2& p2, const Vec2& q1, const Vec2& q2)
{
    const double d1 = orient(q1, q2, p1);
    const double d2 = orient(q1, q2, p2);
    const double d3 = orient(p1, p2, q1);
    const double d4 = orient(p1, p2, q2);
    if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) && ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
        return true;
    }
    auto on_segment = [](const Vec2& a, const Vec2& b, const Vec2& p) {
        return std::min(a.x, b.x) <= p.x && p.x <= std::max(a.x, b.x) && std::min(a.y, b.y) <= p.y
               && p.y <= std::max(a.y, b.y);
    };
    return (d1 == 0 && on_segment(q1, q2, p1)) || (d2 == 0 && on_segment(q1, q2, p2))
           || (d3 == 0 && on_segment(p1, p2, q1)) || (d4 == 0 && on_segment(p1, p2, q2));
}

/// Rotates a counter-clockwise triple so that (v0, v1) is its longest edge.
std::array<int, 3> longest_edge_first(std::array<int, 3> t, const std::vector<Vec2>& nodes)
{
    int best = 0;
    double best_len = -1.0;
    for (int r = 0; r < 3; ++r) {
        const double len = norm(nodes[t[(r + 1) % 3]] - nodes[t[r]]);
        if (len > best_len * (1.0 + 1e-12)) {
            best_len = len;
            best = r;
        }
    }
    return {t[best], t[(best + 1) % 3], t[(best + 2) % 3]};
}

void finish_partition(Partition& p)
{
    const int n = p.size();
    p.touches_boundary.assign(n, false);
    std::map<std::pair<int, int>, std::vector<int>> edge_owner;
    for (int d = 0; d < n; ++d) {
        const auto c = p.corners(d);
        if (orient(c[0], c[1], c[2]) <= 1e-14 * std::max(1.0, p.total_area())) {
            throw DegeneracyError(d, -1, "degenerate partition triangle");
        }
        for (int k = 0; k < 3; ++k) {
            const int a = p.triangles[d][k];
            const int b = p.triangles[d][(k + 1) % 3];
            edge_owner[{std::min(a, b), std::max(a, b)}].push_back(d);
            if (p.boundary_index[a] >= 0) {
                p.touches_boundary[d] = true;
            }
        }
    }
    p.adjacency.assign(n, {});
    for (const auto& [edge, owners] : edge_owner) {
        if (owners.size() == 2) {
            p.adjacency[owners[0]].push_back(owners[1]);
            p.adjacency[owners[1]].push_back(owners[0]);
        }
    }
    for (auto& adj : p.adjacency) {
        std::sort(adj.begin(), adj.end());
    }
}

Partition build_grid(const ReferenceDomain& reference, const PartitionSpec& spec)
{
    const auto& bnodes = reference.boundary_nodes();
    const int cx = spec.cells_x;
    const int cy = spec.cells_y;
    if (cx < 1 || cy < 1) {
        throw InputError("grid partition needs at least one cell per direction");
    }
    double x0 = std::numeric_limits<double>::max(), x1 = -x0, y0 = x0, y1 = -x0;
    for (const auto& v : bnodes) {
        x0 = std::min(x0, v.x);
        x1 = std::max(x1, v.x);
        y0 = std::min(y0, v.y);
        y1 = std::max(y1, v.y);
    }
    if (reference.num_boundary_nodes() != 2 * (cx + cy)) {
        throw InputError("grid partition: reference must have 2*(cells_x + cells_y) boundary nodes");
    }
    const double tol = 1e-12 * std::max(x1 - x0, y1 - y0);

    Partition p;
    p.num_boundary_nodes = reference.num_boundary_nodes();
    auto id = [cx](int i, int j) { return j * (cx + 1) + i; };
    for (int j = 0; j <= cy; ++j) {
        for (int i = 0; i <= cx; ++i) {
            p.nodes.push_back({x0 + (x1 - x0) * i / cx, y0 + (y1 - y0) * j / cy});
        }
    }
    p.boundary_index.assign(p.nodes.size(), -1);
    int matched = 0;
    for (int k = 0; k < static_cast<int>(p.nodes.size()); ++k) {
        const int i = k % (cx + 1);
        const int j = k / (cx + 1);
        if (i != 0 && i != cx && j != 0 && j != cy) {
            continue;
        }
        for (int b = 0; b < reference.num_boundary_nodes(); ++b) {
            if (norm(bnodes[b] - p.nodes[k]) <= tol) {
                p.boundary_index[k] = b;
                p.nodes[k] = bnodes[b];
                ++matched;
                break;
            }
        }
        if (p.boundary_index[k] < 0) {
            throw InputError("grid partition: reference boundary nodes do not match the grid boundary");
        }
    }
    if (matched != reference.num_boundary_nodes()) {
        throw InputError("grid partition: reference boundary nodes do not match the grid boundary");
    }
    for (int j = 0; j < cy; ++j) {
        for (int i = 0; i < cx; ++i) {
            const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
            p.triangles.push_back(longest_edge_first({a, b, c}, p.nodes));
            p.triangles.push_back(longest_edge_first({a, c, d}, p.nodes));
        }
    }
    finish_partition(p);
    return p;
}

Partition build_ring(const ReferenceDomain& reference, const PartitionSpec& spec)
{
    if (!(spec.ring_depth > 0.0 && spec.ring_depth < 1.0)) {
        throw InputError("ring partition: ring_depth must lie in (0, 1)");
    }
    const auto& bnodes = reference.boundary_nodes();
    const int J = reference.num_boundary_nodes();
    const Vec2 c = reference.centroid();

    Partition p;
    p.num_boundary_nodes = J;
    p.nodes = bnodes;
    for (const auto& v : bnodes) {
        p.nodes.push_back(c + (1.0 - spec.ring_depth) * (v - c));
    }
    p.nodes.push_back(c);
    p.boundary_index.assign(p.nodes.size(), -1);
    for (int j = 0; j < J; ++j) {
        p.boundary_index[j] = j;
    }
    const int centre = 2 * J;
    for (int j = 0; j < J; ++j) {
        const int v0 = j, v1 = (j + 1) % J, w0 = J + j, w1 = J + (j + 1) % J;
        p.triangles.push_back(longest_edge_first({v0, v1, w1}, p.nodes));
        p.triangles.push_back(longest_edge_first({v0, w1, w0}, p.nodes));
    }
    for (int j = 0; j < J; ++j) {
        p.triangles.push_back(longest_edge_first({centre, J + j, J + (j + 1) % J}, p.nodes));
    }
    finish_partition(p);
    return p;
}

std::vector<Vec2> scaled_polygon(const std::vector<Vec2>& poly, const Vec2& c, double s)
{
    std::vector<Vec2> out;
    out.reserve(poly.size());
    for (const auto& v : poly) {
        out.push_back(c + s * (v - c));
    }
    return out;
}

} // namespace

double polygon_signed_area(const std::vector<Vec2>& polygon)
{
    double a = 0.0;
    for (std::size_t i = 0; i < polygon.size(); ++i) {
        a += cross(polygon[i], polygon[(i + 1) % polygon.size()]);
    }
    return 0.5 * a;
}

bool polygon_is_simple(const std::vector<Vec2>& polygon)
{
    const std::size_t n = polygon.size();
    if (n < 3) {
        return false;
    }
    for (std::size_t i = 0; i < n; ++i) {
        const Vec2& a = polygon[i];
        const Vec2& b = polygon[(i + 1) % n];
        if (a == b) {
            return false;
        }
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool adjacent = (j == i + 1) || (i == 0 && j == n - 1);
            const Vec2& c = polygon[j];
            const Vec2& d = polygon[(j + 1) % n];
            if (adjacent) {
                // Shared endpoint only: reject folding back along the same line.
                const Vec2& shared = (j == i + 1) ? b : a;
                const Vec2& p = (j == i + 1) ? a : b;
                const Vec2& q = (j == i + 1) ? d : c;
                if (orient(p, shared, q) == 0.0 && dot(p - shared, q - shared) > 0.0) {
                    return false;
                }
                continue;
            }
            if (segments_intersect(a, b, c, d)) {
                return false;
            }
        }
    }
    return true;
}

bool point_in_polygon(const std::vector<Vec2>& polygon, const Vec2& p)
{
    bool inside = false;
    const std::size_t n = polygon.size();
    for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
        const Vec2& a = polygon[i];
        const Vec2& b = polygon[j];
        if ((a.y > p.y) != (b.y > p.y)) {
            const double xc = a.x + (p.y - a.y) * (b.x - a.x) / (b.y - a.y);
            if (p.x < xc) {
                inside = !inside;
            }
        }
    }
    return inside;
}

ReferenceDomain::ReferenceDomain(std::vector<Vec2> boundary_nodes) : nodes_(std::move(boundary_nodes))
{
    if (nodes_.size() < 3) {
        throw InputError("reference domain needs at least 3 boundary nodes");
    }
    if (!polygon_is_simple(nodes_)) {
        throw InputError("reference polygon is not simple");
    }
    if (polygon_signed_area(nodes_) <= 0.0) {
        throw InputError("reference polygon must be counter-clockwise with positive area");
    }
}

ReferenceDomain ReferenceDomain::unit_square(int nodes_per_side)
{
    const int n = nodes_per_side;
    std::vector<Vec2> v;
    for (int i = 0; i < n; ++i) v.push_back({static_cast<double>(i) / n, 0.0});
    for (int i = 0; i < n; ++i) v.push_back({1.0, static_cast<double>(i) / n});
    for (int i = 0; i < n; ++i) v.push_back({1.0 - static_cast<double>(i) / n, 1.0});
    for (int i = 0; i < n; ++i) v.push_back({0.0, 1.0 - static_cast<double>(i) / n});
    return ReferenceDomain(std::move(v));
}

double ReferenceDomain::area() const { return polygon_signed_area(nodes_); }

Vec2 ReferenceDomain::centroid() const
{
    double a = 0.0;
    Vec2 c{};
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
        const Vec2& p = nodes_[i];
        const Vec2& q = nodes_[(i + 1) % nodes_.size()];
        const double w = cross(p, q);
        a += w;
        c += w * (p + q);
    }
    return (1.0 / (3.0 * a)) * c;
}

PerturbationModel PerturbationModel::uniform_box(int num_nodes, double half_width)
{
    PerturbationModel m;
    m.half_widths.assign(num_nodes, Vec2{half_width, half_width});
    return m;
}

PerturbationModel PerturbationModel::degenerate(int num_nodes) { return uniform_box(num_nodes, 0.0); }

bool PerturbationModel::is_degenerate() const
{
    return std::all_of(half_widths.begin(), half_widths.end(), [](const Vec2& w) { return w.x == 0.0 && w.y == 0.0; });
}

void PerturbationModel::validate(int num_nodes) const
{
    if (static_cast<int>(half_widths.size()) != num_nodes) {
        throw InputError("perturbation model has " + std::to_string(half_widths.size())
                         + " half-widths for " + std::to_string(num_nodes) + " boundary nodes");
    }
    for (const auto& w : half_widths) {
        if (!(std::isfinite(w.x) && std::isfinite(w.y) && w.x >= 0.0 && w.y >= 0.0)) {
            throw InputError("perturbation half-widths must be finite and non-negative");
        }
    }
    if (!(jacobian_lower > 0.0 && jacobian_lower <= jacobian_upper && std::isfinite(jacobian_upper))) {
        throw InputError("jacobian bounds must satisfy 0 < lower <= upper < inf");
    }
    if (max_retries < 0) {
        throw InputError("max_retries must be non-negative");
    }
}

double BoundarySample::magnitude() const
{
    double m = 0.0;
    for (const auto& t : displacements) {
        m = std::max(m, norm(t));
    }
    return m;
}

double Partition::area(int d) const
{
    const auto c = corners(d);
    return 0.5 * orient(c[0], c[1], c[2]);
}

double Partition::total_area() const
{
    double a = 0.0;
    for (int d = 0; d < size(); ++d) {
        const auto& t = triangles[d];
        a += 0.5 * orient(nodes[t[0]], nodes[t[1]], nodes[t[2]]);
    }
    return a;
}

std::vector<Vec2> Partition::perturbed_nodes(const BoundarySample& sample) const
{
    std::vector<Vec2> moved = nodes;
    for (std::size_t k = 0; k < nodes.size(); ++k) {
        if (boundary_index[k] >= 0) {
            moved[k] = sample.perturbed_nodes[boundary_index[k]];
        }
    }
    return moved;
}

std::array<Vec2, 3> Partition::corners(int d) const
{
    const auto& t = triangles[d];
    return {nodes[t[0]], nodes[t[1]], nodes[t[2]]};
}

std::array<Vec2, 3> Partition::perturbed_corners(int d, const std::vector<Vec2>& moved) const
{
    const auto& t = triangles[d];
    return {moved[t[0]], moved[t[1]], moved[t[2]]};
}

Partition build_partition(const ReferenceDomain& reference, const PartitionSpec& spec)
{
    switch (spec.kind) {
    case PartitionSpec::Kind::Grid:
        return build_grid(reference, spec);
    case PartitionSpec::Kind::Ring:
        return build_ring(reference, spec);
    }
    throw InputError("unknown partition kind");
}

AffineMapSet affine_maps(const Partition& partition, const BoundarySample& sample)
{
    if (static_cast<int>(sample.perturbed_nodes.size()) != partition.num_boundary_nodes) {
        throw InputError("sample and partition refer to different reference domains");
    }
    const auto moved = partition.perturbed_nodes(sample);
    AffineMapSet set;
    set.sample_index = sample.index;
    set.maps.resize(partition.size());
    for (int d = 0; d < partition.size(); ++d) {
        if (!partition.touches_boundary[d]) {
            continue;
        }
        const auto s = partition.corners(d);
        const auto r = partition.perturbed_corners(d, moved);
        if (r == s) {
            continue;
        }
        const Mat2 S = Mat2::from_columns(s[1] - s[0], s[2] - s[0]);
        const Mat2 R = Mat2::from_columns(r[1] - r[0], r[2] - r[0]);
        if (R.det() <= 1e-12 * std::abs(S.det())) {
            throw DegeneracyError(d, sample.index, "perturbed subdomain is degenerate or inverted");
        }
        AffineMap& m = set.maps[d];
        m.jacobian = S * R.inverse();
        m.inverse = R * S.inverse();
        m.det = S.det() / R.det();
        m.physical_anchor = r[0];
        m.reference_anchor = s[0];
        m.identity = false;
    }
    return set;
}

JacobianReport validate_jacobians(const AffineMapSet& maps, double m_lower, double m_upper)
{
    if (!(m_lower > 0.0 && m_lower <= m_upper)) {
        throw InputError("validate_jacobians: need 0 < m_lower <= m_upper");
    }
    JacobianReport rep;
    rep.min_abs_det = std::numeric_limits<double>::infinity();
    rep.max_abs_det = 0.0;
    for (std::size_t d = 0; d < maps.maps.size(); ++d) {
        const auto& m = maps.maps[d];
        const double a = std::abs(m.det);
        rep.min_abs_det = std::min(rep.min_abs_det, a);
        rep.max_abs_det = std::max(rep.max_abs_det, a);
        rep.max_norm = std::max(rep.max_norm, operator_norm(m.jacobian));
        rep.max_inverse_norm = std::max(rep.max_inverse_norm, operator_norm(m.inverse));
        if (a < m_lower || a > m_upper) {
            rep.violating.push_back(static_cast<int>(d));
        }
    }
    rep.passed = rep.violating.empty();
    return rep;
}

TransformedCoefficients::TransformedCoefficients(std::shared_ptr<const ProblemData> data, AffineMapSet maps,
                                                 std::shared_ptr<const Partition> partition)
    : data_(std::move(data)), maps_(std::move(maps)), partition_(std::move(partition))
{
    if (!data_) {
        throw InputError("transformed coefficients need problem data");
    }
}

Mat2 TransformedCoefficients::diffusion(int d, const Vec2& y) const
{
    const AffineMap& m = maps_.maps[d];
    if (m.identity) {
        return data_->diffusion(y);
    }
    const Mat2 a = data_->diffusion(m.to_physical(y));
    return (1.0 / std::abs(m.det)) * (m.jacobian * a * m.jacobian.transpose());
}

double TransformedCoefficients::source(int d, const Vec2& y) const
{
    const AffineMap& m = maps_.maps[d];
    if (m.identity) {
        return data_->source(y);
    }
    return data_->source(m.to_physical(y)) / std::abs(m.det);
}

Vec2 TransformedCoefficients::convection(int d, const Vec2& y) const
{
    if (!data_->has_convection) {
        return {};
    }
    const AffineMap& m = maps_.maps[d];
    if (m.identity) {
        return data_->convection(y);
    }
    return (1.0 / std::abs(m.det)) * (m.jacobian * data_->convection(m.to_physical(y)));
}

double TransformedCoefficients::qoi_weight(int d, const Vec2& y) const
{
    const AffineMap& m = maps_.maps[d];
    if (m.identity) {
        return data_->qoi_weight(y);
    }
    return data_->qoi_weight(m.to_physical(y)) / std::abs(m.det);
}

int TransformedCoefficients::locate(const Vec2& y) const
{
    if (!partition_) {
        throw DomainError("point location needs the partition");
    }
    for (int d = 0; d < partition_->size(); ++d) {
        const auto c = partition_->corners(d);
        const double area2 = orient(c[0], c[1], c[2]);
        const double tol = -1e-12 * area2;
        if (orient(c[0], c[1], y) >= tol && orient(c[1], c[2], y) >= tol && orient(c[2], c[0], y) >= tol) {
            return d;
        }
    }
    throw DomainError("point (" + std::to_string(y.x) + ", " + std::to_string(y.y) + ") lies outside the reference domain");
}

TransformedCoefficients transform_coefficients(std::shared_ptr<const ProblemData> data, const AffineMapSet& maps,
                                               std::shared_ptr<const Partition> partition)
{
    return TransformedCoefficients(std::move(data), maps, std::move(partition));
}

double triangle_diameter(const std::array<Vec2, 3>& t)
{
    return std::max({norm(t[1] - t[0]), norm(t[2] - t[1]), norm(t[0] - t[2])});
}

double triangle_inscribed_diameter(const std::array<Vec2, 3>& t)
{
    const double area = 0.5 * std::abs(orient(t[0], t[1], t[2]));
    const double semi = 0.5 * (norm(t[1] - t[0]) + norm(t[2] - t[1]) + norm(t[0] - t[2]));
    return 2.0 * area / semi;
}

ShapeReport shape_report(const Partition& partition, const BoundarySample& sample, const ProblemData& data,
                         double gamma)
{
    if (!(gamma > 0.0 && gamma <= 1.0)) {
        throw InputError("shape_report: gamma must lie in (0, 1]");
    }
    const auto moved = partition.perturbed_nodes(sample);
    ShapeReport rep;
    rep.gamma = gamma;
    rep.a_min = std::numeric_limits<double>::infinity();
    rep.a_max = 0.0;
    double worst = 0.0;
    double best = std::numeric_limits<double>::infinity();
    for (int d = 0; d < partition.size(); ++d) {
        const auto s = partition.corners(d);
        const auto r = partition.perturbed_corners(d, moved);
        if (orient(r[0], r[1], r[2]) <= 0.0) {
            throw DegeneracyError(d, sample.index, "shape_report: zero-area or inverted triangle");
        }
        const double k = triangle_diameter(s), p = triangle_inscribed_diameter(s);
        const double kt = triangle_diameter(r), pt = triangle_inscribed_diameter(r);
        rep.kappa.push_back(k);
        rep.rho.push_back(p);
        rep.kappa_perturbed.push_back(kt);
        rep.rho_perturbed.push_back(pt);
        rep.max_aspect_perturbed = std::max(rep.max_aspect_perturbed, kt / pt);
        const double ratio = (k * kt) / (p * pt);
        worst = std::max(worst, ratio * ratio);
        best = std::min(best, 1.0 / (ratio * ratio));

        const Vec2 centre = (1.0 / 3.0) * (r[0] + r[1] + r[2]);
        for (const Vec2& x : {r[0], r[1], r[2], centre}) {
            const auto [lo, hi] = symmetric_eigenvalues(data.diffusion(x));
            rep.a_min = std::min(rep.a_min, lo);
            rep.a_max = std::max(rep.a_max, hi);
        }
    }
    rep.continuity = rep.a_max * worst;
    rep.coercivity = gamma * rep.a_min * best;
    rep.h1_amplification = std::sqrt(rep.a_max / (gamma * rep.a_min)) * worst;
    return rep;
}

BoundarySample sample_perturbation(const PerturbationModel& model, const Partition& partition,
                                   std::uint64_t master_seed, long long index)
{
    if (index < 1) {
        throw InputError("sample index must be >= 1");
    }
    const int J = partition.num_boundary_nodes;
    model.validate(J);

    std::vector<Vec2> reference(J);
    for (std::size_t k = 0; k < partition.nodes.size(); ++k) {
        if (partition.boundary_index[k] >= 0) {
            reference[partition.boundary_index[k]] = partition.nodes[k];
        }
    }

    std::string last_reason = "no attempt";
    for (int attempt = 0; attempt <= model.max_retries; ++attempt) {
        CounterStream stream(master_seed, static_cast<std::uint64_t>(index), static_cast<std::uint32_t>(attempt));
        BoundarySample s;
        s.index = index;
        s.rejections = attempt;
        s.displacements.resize(J);
        s.perturbed_nodes.resize(J);
        for (int j = 0; j < J; ++j) {
            const Vec2 w = model.half_widths[j];
            const double ux = stream.next_uniform();
            const double uy = stream.next_uniform();
            s.displacements[j] = {w.x == 0.0 ? 0.0 : w.x * (2.0 * ux - 1.0), w.y == 0.0 ? 0.0 : w.y * (2.0 * uy - 1.0)};
            s.perturbed_nodes[j] = reference[j] + s.displacements[j];
        }
        if (!polygon_is_simple(s.perturbed_nodes) || polygon_signed_area(s.perturbed_nodes) <= 0.0) {
            last_reason = "perturbed polygon is not simple";
            continue;
        }
        try {
            const auto maps = affine_maps(partition, s);
            if (!validate_jacobians(maps, model.jacobian_lower, model.jacobian_upper).passed) {
                last_reason = "jacobian determinant outside admissible bounds";
                continue;
            }
        } catch (const DegeneracyError&) {
            last_reason = "degenerate perturbed subdomain";
            continue;
        }

        double area = 0.0;
        Vec2 c{};
        for (int j = 0; j < J; ++j) {
            const double w = cross(reference[j], reference[(j + 1) % J]);
            area += w;
            c += w * (reference[j] + reference[(j + 1) % J]);
        }
        c = (1.0 / (3.0 * area)) * c;
        const auto inner = scaled_polygon(reference, c, model.inner_scale);
        const auto outer = scaled_polygon(reference, c, model.outer_scale);
        s.envelope_ok = std::all_of(s.perturbed_nodes.begin(), s.perturbed_nodes.end(),
                                    [&](const Vec2& v) { return point_in_polygon(outer, v); })
                        && std::all_of(inner.begin(), inner.end(),
                                       [&](const Vec2& v) { return point_in_polygon(s.perturbed_nodes, v); });
        return s;
    }
    throw SamplingError(index, model.max_retries, last_reason);
}

} // namespace stochdom
