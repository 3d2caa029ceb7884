#pragma once

#include "ferrolayer/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

namespace ferrolayer {

/// Three-point weights on nodes (x_{i-1}, x_i, x_{i+1}) with spacings hm = x_i − x_{i-1},
/// hp = x_{i+1} − x_i.
struct Stencil3 {
    double a, b, c;

    template <class V>
    V apply(const V& um, const V& u0, const V& up) const { return a * um + b * u0 + c * up; }
};

inline Stencil3 d1_central(double hm, double hp)
{
    return {-hp / (hm * (hm + hp)), (hp - hm) / (hm * hp), hm / (hp * (hm + hp))};
}

inline Stencil3 d2_central(double hm, double hp)
{
    return {2.0 / (hm * (hm + hp)), -2.0 / (hm * hp), 2.0 / (hp * (hm + hp))};
}

/// Second-order one-sided first derivative at x0 from nodes x0, x0+h1, x0+h1+h2 (h1 > 0).
inline Stencil3 d1_forward(double h1, double h2)
{
    const double s = h1 + h2;
    return {-(h1 + s) / (h1 * s), s / (h1 * h2), -h1 / (s * h2)};
}

/// Trapezoid weights for a sorted node list.
inline std::vector<double> trapezoid_weights(std::span<const double> x)
{
    std::vector<double> w(x.size(), 0.0);
    for (std::size_t i = 1; i < x.size(); ++i) {
        const double h = x[i] - x[i - 1];
        w[i - 1] += 0.5 * h;
        w[i] += 0.5 * h;
    }
    return w;
}

/// Four-point Lagrange stencil: first index and weights for evaluating at `t` from nodes `x`.
/// Falls back to fewer points when the node list is short. Outside the node range the end
/// stencil extrapolates; callers clamp when that matters.
struct LagrangeStencil {
    std::size_t first = 0;
    std::size_t count = 0;
    std::array<double, 4> w{};
};

inline LagrangeStencil lagrange4(std::span<const double> x, double t)
{
    LagrangeStencil s;
    const std::size_t n = x.size();
    if (n == 0) return s;
    if (n == 1) {
        s.count = 1;
        s.w[0] = 1.0;
        return s;
    }
    const std::size_t k = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), t) - x.begin());
    const std::size_t cnt = std::min<std::size_t>(4, n);
    std::size_t lo = k >= 2 ? k - 2 : 0;
    if (lo + cnt > n) lo = n - cnt;
    s.first = lo;
    s.count = cnt;
    for (std::size_t i = 0; i < cnt; ++i) {
        double w = 1.0;
        for (std::size_t j = 0; j < cnt; ++j)
            if (j != i) w *= (t - x[lo + j]) / (x[lo + i] - x[lo + j]);
        s.w[i] = w;
    }
    // exact hits reproduce the node value bit for bit
    for (std::size_t i = 0; i < cnt; ++i)
        if (x[lo + i] == t) {
            s.w.fill(0.0);
            s.w[i] = 1.0;
        }
    return s;
}

/// Least-squares slope of log(y) against log(x).
inline double loglog_slope(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size() || x.size() < 2) throw ValidationError("slope fit needs at least two points");
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw ValidationError("slope fit needs positive data");
        const double lx = std::log(x[i]), ly = std::log(y[i]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Least-squares slope of y against x.
inline double linear_slope(std::span<const double> x, std::span<const double> y)
{
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    const double n = static_cast<double>(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

/// Time nodes on [0, T]: first step dt/first_div, growing by `growth` until dt, then uniform.
inline std::vector<double> graded_time_nodes(double T, double dt, double first_div = 64.0, double growth = 2.0)
{
    if (!(T > 0.0) || !(dt > 0.0)) throw ValidationError("graded time grid needs T > 0 and dt > 0");
    std::vector<double> t{0.0};
    double h = dt / first_div;
    while (t.back() < T - 1e-12 * T) {
        double step = std::min(h, dt);
        if (t.back() + step > T - 1e-9 * dt) step = T - t.back();
        t.push_back(t.back() + step);
        h *= growth;
    }
    t.back() = T;
    return t;
}

/// Nodes 0 = η_0 < η_1 < … ≤ y_max, first width h_min, widths growing by `stretch` up to h_max.
/// The sequence does not depend on y_max, so truncating at a smaller y_max yields a prefix.
inline std::vector<double> stretched_nodes(double y_max, double h_min, double stretch, double h_max)
{
    if (!(y_max > 0.0) || !(h_min > 0.0) || !(stretch >= 1.0) || !(h_max >= h_min))
        throw ValidationError("invalid stretched grid parameters");
    if (h_min < 1e-6) throw ValidationError("smallest fast-variable cell must be at least 1e-6");
    std::vector<double> y{0.0};
    double h = h_min;
    while (y.back() + h < y_max * (1.0 + 1e-12)) {
        y.push_back(y.back() + h);
        h = std::min(h * stretch, h_max);
    }
    const double rest = y_max - y.back();
    if (rest > 0.25 * (y.size() > 1 ? y.back() - y[y.size() - 2] : h_min))
        y.push_back(y_max);
    else
        y.back() = y_max;
    return y;
}

} // namespace ferrolayer
