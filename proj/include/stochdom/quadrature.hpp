#pragma once

#include <array>

namespace stochdom {

/// Barycentric point with weight normalized to the unit-area simplex (weights sum to 1).
struct TriangleQuadPoint {
    double l0, l1, l2;
    double weight;
};

/// Symmetric 6-point rule, exact for polynomials of degree 4.
inline constexpr std::array<TriangleQuadPoint, 6> triangle_rule_deg4 = [] {
    constexpr double a1 = 0.445948490915964886318329253883;
    constexpr double w1 = 0.223381589678011465944214854968;
    constexpr double a2 = 0.091576213509770743459571463402;
    constexpr double w2 = 0.109951743655321867389118478365;
    constexpr double b1 = 1.0 - 2.0 * a1;
    constexpr double b2 = 1.0 - 2.0 * a2;
    return std::array<TriangleQuadPoint, 6>{{
        {a1, a1, b1, w1}, {a1, b1, a1, w1}, {b1, a1, a1, w1},
        {a2, a2, b2, w2}, {a2, b2, a2, w2}, {b2, a2, a2, w2},
    }};
}();

/// Point s in [0, 1] along a segment; weights sum to 1.
struct LineQuadPoint {
    double s;
    double weight;
};

/// 3-point Gauss-Legendre on [0, 1], exact to degree 5.
inline constexpr std::array<LineQuadPoint, 3> gauss3 = [] {
    constexpr double r = 0.387298334620741688697568559939; // sqrt(3/5)/2
    return std::array<LineQuadPoint, 3>{{
        {0.5 - r, 5.0 / 18.0}, {0.5, 8.0 / 18.0}, {0.5 + r, 5.0 / 18.0},
    }};
}();

} // namespace stochdom
