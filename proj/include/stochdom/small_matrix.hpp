#pragma once

#include <algorithm>
#include <cmath>

namespace stochdom {

struct Vec2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
    constexpr Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
    constexpr Vec2& operator*=(double s) { x *= s; y *= s; return *this; }

    friend constexpr Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
    friend constexpr Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
    friend constexpr Vec2 operator-(const Vec2& a) { return {-a.x, -a.y}; }
    friend constexpr Vec2 operator*(double s, Vec2 a) { return a *= s; }
    friend constexpr Vec2 operator*(Vec2 a, double s) { return a *= s; }
    friend constexpr bool operator==(const Vec2&, const Vec2&) = default;
};

constexpr double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
constexpr double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }

/// Twice the signed area of (a, b, c); positive when counter-clockwise.
constexpr double orient(const Vec2& a, const Vec2& b, const Vec2& c) { return cross(b - a, c - a); }

/// Row-major 2x2 matrix.
struct Mat2 {
    double a11 = 0.0, a12 = 0.0;
    double a21 = 0.0, a22 = 0.0;

    static constexpr Mat2 identity() { return {1.0, 0.0, 0.0, 1.0}; }
    static constexpr Mat2 diag(double d1, double d2) { return {d1, 0.0, 0.0, d2}; }
    /// Matrix whose columns are c1 and c2.
    static constexpr Mat2 from_columns(const Vec2& c1, const Vec2& c2) { return {c1.x, c2.x, c1.y, c2.y}; }

    constexpr double det() const { return a11 * a22 - a12 * a21; }
    constexpr double trace() const { return a11 + a22; }
    constexpr Mat2 transpose() const { return {a11, a21, a12, a22}; }
    constexpr Mat2 inverse() const
    {
        const double d = det();
        return {a22 / d, -a12 / d, -a21 / d, a11 / d};
    }

    friend constexpr Mat2 operator*(const Mat2& a, const Mat2& b)
    {
        return {a.a11 * b.a11 + a.a12 * b.a21, a.a11 * b.a12 + a.a12 * b.a22,
                a.a21 * b.a11 + a.a22 * b.a21, a.a21 * b.a12 + a.a22 * b.a22};
    }
    friend constexpr Vec2 operator*(const Mat2& a, const Vec2& v)
    {
        return {a.a11 * v.x + a.a12 * v.y, a.a21 * v.x + a.a22 * v.y};
    }
    friend constexpr Mat2 operator*(double s, const Mat2& a) { return {s * a.a11, s * a.a12, s * a.a21, s * a.a22}; }
    friend constexpr Mat2 operator+(const Mat2& a, const Mat2& b)
    {
        return {a.a11 + b.a11, a.a12 + b.a12, a.a21 + b.a21, a.a22 + b.a22};
    }
    friend constexpr Mat2 operator-(const Mat2& a, const Mat2& b)
    {
        return {a.a11 - b.a11, a.a12 - b.a12, a.a21 - b.a21, a.a22 - b.a22};
    }
    friend constexpr bool operator==(const Mat2&, const Mat2&) = default;
};

/// Eigenvalues (ascending) of the symmetric part of m.
inline std::pair<double, double> symmetric_eigenvalues(const Mat2& m)
{
    const double off = 0.5 * (m.a12 + m.a21);
    const double mean = 0.5 * (m.a11 + m.a22);
    const double half_diff = 0.5 * (m.a11 - m.a22);
    const double r = std::hypot(half_diff, off);
    return {mean - r, mean + r};
}

/// Operator 2-norm (largest singular value).
inline double operator_norm(const Mat2& m)
{
    const auto [lo, hi] = symmetric_eigenvalues(m.transpose() * m);
    (void)lo;
    return std::sqrt(std::max(hi, 0.0));
}

inline double max_abs_entry(const Mat2& m)
{
    return std::max({std::abs(m.a11), std::abs(m.a12), std::abs(m.a21), std::abs(m.a22)});
}

} // namespace stochdom
