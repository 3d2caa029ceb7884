#pragma once

#include <array>
#include <cmath>
#include <ostream>

namespace ferrolayer {

/// Plain 3-vector used for magnetic moments, fields and profile values.
struct Vec3 {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;

    constexpr double& operator[](int i) { return i == 0 ? x : (i == 1 ? y : z); }
    constexpr double operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

    constexpr Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
    constexpr Vec3& operator-=(const Vec3& o) { x -= o.x; y -= o.y; z -= o.z; return *this; }
    constexpr Vec3& operator*=(double s) { x *= s; y *= s; z *= s; return *this; }

    friend constexpr bool operator==(const Vec3&, const Vec3&) = default;
};

constexpr Vec3 operator+(Vec3 a, const Vec3& b) { return a += b; }
constexpr Vec3 operator-(Vec3 a, const Vec3& b) { return a -= b; }
constexpr Vec3 operator-(const Vec3& a) { return {-a.x, -a.y, -a.z}; }
constexpr Vec3 operator*(double s, Vec3 a) { return a *= s; }
constexpr Vec3 operator*(Vec3 a, double s) { return a *= s; }
constexpr Vec3 operator/(Vec3 a, double s) { return a *= (1.0 / s); }

constexpr double dot(const Vec3& a, const Vec3& b) { return a.x * b.x + a.y * b.y + a.z * b.z; }

/// a ∧ b
constexpr Vec3 cross(const Vec3& a, const Vec3& b)
{
    return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}

inline double norm(const Vec3& a) { return std::sqrt(dot(a, a)); }
constexpr double norm2(const Vec3& a) { return dot(a, a); }
inline double max_abs(const Vec3& a) { return std::fmax(std::fabs(a.x), std::fmax(std::fabs(a.y), std::fabs(a.z))); }

inline Vec3 normalized(const Vec3& a) { return a / norm(a); }

inline constexpr Vec3 e1{1.0, 0.0, 0.0};
inline constexpr Vec3 e2{0.0, 1.0, 0.0};
inline constexpr Vec3 e3{0.0, 0.0, 1.0};

inline std::ostream& operator<<(std::ostream& os, const Vec3& v)
{
    return os << '(' << v.x << ", " << v.y << ", " << v.z << ')';
}

/// Row-major 3x3 matrix. Only what the block solvers need.
struct Mat3 {
    std::array<double, 9> a{};

    static constexpr Mat3 identity() { Mat3 m; m.a = {1, 0, 0, 0, 1, 0, 0, 0, 1}; return m; }
    static constexpr Mat3 zero() { return Mat3{}; }

    /// Matrix of v ↦ u ∧ v.
    static constexpr Mat3 cross_matrix(const Vec3& u)
    {
        Mat3 m;
        m.a = {0.0, -u.z, u.y, u.z, 0.0, -u.x, -u.y, u.x, 0.0};
        return m;
    }

    /// Matrix of v ↦ (v·n) w.
    static constexpr Mat3 outer(const Vec3& w, const Vec3& n)
    {
        Mat3 m;
        m.a = {w.x * n.x, w.x * n.y, w.x * n.z, w.y * n.x, w.y * n.y, w.y * n.z, w.z * n.x, w.z * n.y, w.z * n.z};
        return m;
    }

    constexpr double& operator()(int r, int c) { return a[3 * r + c]; }
    constexpr double operator()(int r, int c) const { return a[3 * r + c]; }

    constexpr Mat3& operator+=(const Mat3& o) { for (int i = 0; i < 9; ++i) a[i] += o.a[i]; return *this; }
    constexpr Mat3& operator-=(const Mat3& o) { for (int i = 0; i < 9; ++i) a[i] -= o.a[i]; return *this; }
    constexpr Mat3& operator*=(double s) { for (auto& v : a) v *= s; return *this; }

    constexpr double det() const
    {
        return a[0] * (a[4] * a[8] - a[5] * a[7]) - a[1] * (a[3] * a[8] - a[5] * a[6]) + a[2] * (a[3] * a[7] - a[4] * a[6]);
    }

    /// Adjugate-based inverse; caller checks det() first.
    constexpr Mat3 inverse() const
    {
        const double d = det();
        Mat3 m;
        m.a = {(a[4] * a[8] - a[5] * a[7]) / d, (a[2] * a[7] - a[1] * a[8]) / d, (a[1] * a[5] - a[2] * a[4]) / d,
               (a[5] * a[6] - a[3] * a[8]) / d, (a[0] * a[8] - a[2] * a[6]) / d, (a[2] * a[3] - a[0] * a[5]) / d,
               (a[3] * a[7] - a[4] * a[6]) / d, (a[1] * a[6] - a[0] * a[7]) / d, (a[0] * a[4] - a[1] * a[3]) / d};
        return m;
    }

    double max_abs() const
    {
        double m = 0.0;
        for (double v : a) m = std::fmax(m, std::fabs(v));
        return m;
    }
};

constexpr Mat3 operator+(Mat3 a, const Mat3& b) { return a += b; }
constexpr Mat3 operator-(Mat3 a, const Mat3& b) { return a -= b; }
constexpr Mat3 operator*(double s, Mat3 a) { return a *= s; }

constexpr Vec3 operator*(const Mat3& m, const Vec3& v)
{
    return {m.a[0] * v.x + m.a[1] * v.y + m.a[2] * v.z,
            m.a[3] * v.x + m.a[4] * v.y + m.a[5] * v.z,
            m.a[6] * v.x + m.a[7] * v.y + m.a[8] * v.z};
}

constexpr Mat3 operator*(const Mat3& p, const Mat3& q)
{
    Mat3 m;
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            m.a[3 * r + c] = p.a[3 * r] * q.a[c] + p.a[3 * r + 1] * q.a[3 + c] + p.a[3 * r + 2] * q.a[6 + c];
    return m;
}

} // namespace ferrolayer
