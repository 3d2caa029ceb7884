#pragma once

#include "ferrolayer/errors.hpp"
#include "ferrolayer/strayfield.hpp"
#include "ferrolayer/vec3.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

namespace ferrolayer {

/// u∧H − u∧(u∧H)
inline Vec3 rhs_limit(const Vec3& u, const Vec3& H) { return cross(u, H) - cross(u, cross(u, H)); }

/// Pre-renormalization drift above this aborts a step.
inline constexpr double max_step_drift = 1e-3;

inline int step_count(double T, double dt)
{
    if (!(dt > 0.0)) throw ValidationError("dt must be positive");
    if (!(T >= 0.0)) throw ValidationError("T must be non-negative");
    return std::max(1, static_cast<int>(std::ceil(T / dt - 1e-9)));
}

/// Cubic Hermite interpolation between (u0, f0) at 0 and (u1, f1) at h, evaluated at s·h.
inline Vec3 hermite(const Vec3& u0, const Vec3& f0, const Vec3& u1, const Vec3& f1, double h, double s)
{
    const double s2 = s * s, s3 = s2 * s;
    return (2 * s3 - 3 * s2 + 1) * u0 + (s3 - 2 * s2 + s) * h * f0 + (-2 * s3 + 3 * s2) * u1 + (s3 - s2) * h * f1;
}

/// One magnetic moment driven by the slab stray field, stored on a uniform time grid with
/// Hermite dense output.
struct PointTrajectory {
    double dt = 0.0;
    std::vector<Vec3> u;
    std::vector<Vec3> rate;
    double norm_drift = 0.0;

    double final_time() const { return dt * static_cast<double>(u.size() - 1); }

    Vec3 at(double t) const
    {
        if (u.size() == 1 || t <= 0.0) return u.front();
        const double pos = t / dt;
        std::size_t i = static_cast<std::size_t>(pos);
        if (i >= u.size() - 1) {
            if (t >= final_time()) return u.back();
            i = u.size() - 2;
        }
        const double s = pos - static_cast<double>(i);
        if (s == 0.0) return u[i];
        return hermite(u[i], rate[i], u[i + 1], rate[i + 1], dt, s);
    }

    Vec3 rate_at(double t) const
    {
        const Vec3 v = at(t);
        return rhs_limit(v, stray_1d(v));
    }
};

/// RK4 step with renormalization; returns the pre-renormalization drift through `drift`.
template <class Rhs>
Vec3 rk4_step_sphere(const Vec3& u, double dt, Rhs&& f, double& drift)
{
    const Vec3 k1 = f(u);
    const Vec3 k2 = f(u + 0.5 * dt * k1);
    const Vec3 k3 = f(u + 0.5 * dt * k2);
    const Vec3 k4 = f(u + dt * k3);
    const Vec3 v = u + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    drift = std::fabs(norm(v) - 1.0);
    return normalized(v);
}

inline PointTrajectory integrate_point(const Vec3& u_init, double T, double dt)
{
    const int n = step_count(T, dt);
    PointTrajectory p;
    p.dt = T > 0.0 ? T / n : dt;
    p.u.reserve(static_cast<std::size_t>(n) + 1);
    auto f = [](const Vec3& v) { return rhs_limit(v, stray_1d(v)); };
    Vec3 u = u_init;
    p.u.push_back(u);
    if (T > 0.0)
        for (int s = 0; s < n; ++s) {
            double drift = 0.0;
            u = rk4_step_sphere(u, p.dt, f, drift);
            p.norm_drift = std::max(p.norm_drift, drift);
            if (drift > max_step_drift) throw SolverAbort("limit step drift exceeds 1e-3; reduce dt");
            p.u.push_back(u);
        }
    p.rate.reserve(p.u.size());
    for (const auto& v : p.u) p.rate.push_back(f(v));
    return p;
}

/// Initial magnetization given per side as functions on all of Ω; the value on Ω± is the
/// corresponding side function. Values are normalized on evaluation.
struct InitialData {
    std::function<Vec3(double)> minus;
    std::function<Vec3(double)> plus;

    Vec3 raw(Side s, double x) const { return s == Side::minus ? minus(x) : plus(x); }
    Vec3 value(Side s, double x) const { return normalized(raw(s, x)); }

    MagnetizationField sample(const SlabDomain& d) const
    {
        auto f = MagnetizationField::on(d);
        for (std::size_t i = 0; i < f.minus.size(); ++i) f.minus[i] = value(Side::minus, f.x_minus[i]);
        for (std::size_t i = 0; i < f.plus.size(); ++i) f.plus[i] = value(Side::plus, f.x_plus[i]);
        return f;
    }

    static InitialData constant(Vec3 a, Vec3 b)
    {
        return {[a](double) { return a; }, [b](double) { return b; }};
    }
};

using StrayCallback = std::function<StrayField(const MagnetizationField&)>;

struct LimitTrajectory {
    std::vector<double> times;
    std::vector<MagnetizationField> states;
    double norm_drift = 0.0;
};

/// Evaluates rhs_limit on a whole field with the given stray-field operator.
inline MagnetizationField limit_rate(const MagnetizationField& u, const StrayCallback& stray)
{
    const StrayField h = stray(u);
    MagnetizationField r = u;
    r.on_sphere = false;
    for (std::size_t i = 0; i < u.minus.size(); ++i) r.minus[i] = rhs_limit(u.minus[i], h.minus[i]);
    for (std::size_t i = 0; i < u.plus.size(); ++i) r.plus[i] = rhs_limit(u.plus[i], h.plus[i]);
    return r;
}

/// Classical RK4 for (LL0) on a two-sided field, renormalized after every step. The stray
/// callback makes the coupling pluggable; the slab kernel is pointwise.
inline LimitTrajectory integrate_limit(const MagnetizationField& u_init, double T, double dt,
                                       const StrayCallback& stray = stray_field_1d, int save_every = 1)
{
    if (u_init.norm_defect() > 1e-8) throw ValidationError("limit initial data is not on the unit sphere");
    if (save_every < 1) throw ValidationError("save_every must be positive");
    const int n = step_count(T, dt);
    const double h = T / n;

    auto axpy = [](const MagnetizationField& a, double s, const MagnetizationField& b) {
        MagnetizationField r = a;
        for (std::size_t i = 0; i < r.minus.size(); ++i) r.minus[i] += s * b.minus[i];
        for (std::size_t i = 0; i < r.plus.size(); ++i) r.plus[i] += s * b.plus[i];
        return r;
    };

    LimitTrajectory traj;
    MagnetizationField u = u_init;
    u.time = 0.0;
    traj.times.push_back(0.0);
    traj.states.push_back(u);
    for (int s = 1; s <= n; ++s) {
        const auto k1 = limit_rate(u, stray);
        const auto k2 = limit_rate(axpy(u, 0.5 * h, k1), stray);
        const auto k3 = limit_rate(axpy(u, 0.5 * h, k2), stray);
        const auto k4 = limit_rate(axpy(u, h, k3), stray);
        for (int side = 0; side < 2; ++side) {
            auto& v = side == 0 ? u.minus : u.plus;
            const auto& a = side == 0 ? k1.minus : k1.plus;
            const auto& b = side == 0 ? k2.minus : k2.plus;
            const auto& c = side == 0 ? k3.minus : k3.plus;
            const auto& d = side == 0 ? k4.minus : k4.plus;
            for (std::size_t i = 0; i < v.size(); ++i) {
                const Vec3 w = v[i] + (h / 6.0) * (a[i] + 2.0 * b[i] + 2.0 * c[i] + d[i]);
                const double drift = std::fabs(norm(w) - 1.0);
                traj.norm_drift = std::max(traj.norm_drift, drift);
                if (drift > max_step_drift) throw SolverAbort("limit step drift exceeds 1e-3; reduce dt");
                v[i] = normalized(w);
            }
        }
        u.time = s * h;
        if (s % save_every == 0 || s == n) {
            traj.times.push_back(u.time);
            traj.states.push_back(u);
        }
    }
    return traj;
}

} // namespace ferrolayer
