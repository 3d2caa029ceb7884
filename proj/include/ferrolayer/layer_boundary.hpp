#pragma once

#include "ferrolayer/block_tridiag.hpp"
#include "ferrolayer/errors.hpp"
#include "ferrolayer/geometry.hpp"
#include "ferrolayer/layer_internal.hpp"
#include "ferrolayer/limit_model.hpp"
#include "ferrolayer/numerics.hpp"
#include "ferrolayer/parallel.hpp"
#include "ferrolayer/vec3.hpp"

#include <cmath>
#include <functional>
#include <memory>
#include <span>
#include <vector>

namespace ferrolayer {

/// Right side of the boundary-layer system, linear in 𝔘:
/// 𝔘∧H0 − (𝔘·n)u⁰∧n − 𝔘∧(u⁰∧H0) − u⁰∧(𝔘∧H0) + (𝔘·n)u⁰∧(u⁰∧n).
inline Vec3 boundary_rhs(const Vec3& Uf, const Vec3& u0, const Vec3& H0, const Vec3& n)
{
    const double un = dot(Uf, n);
    return cross(Uf, H0) - un * cross(u0, n) - cross(Uf, cross(u0, H0)) - cross(u0, cross(Uf, H0)) +
           un * cross(u0, cross(u0, n));
}

inline Mat3 boundary_rhs_matrix(const Vec3& u0, const Vec3& H0, const Vec3& n)
{
    Mat3 m;
    for (int c = 0; c < 3; ++c) {
        Vec3 e{};
        e[c] = 1.0;
        const Vec3 col = boundary_rhs(e, u0, H0, n);
        for (int r = 0; r < 3; ++r) m(r, c) = col[r];
    }
    return m;
}

/// Limit solution and its outward normal derivative at one boundary-layer x node.
struct BoundaryNodeData {
    std::function<Vec3(double)> u0;      ///< u⁰(t, x)
    std::function<Vec3(double)> neumann; ///< Θ(x)∂_𝔫u⁰(t, x), the z = 0 Neumann data
};

struct BoundaryProfile {
    std::vector<double> t;
    std::vector<double> x; ///< nodes in V_Γ near both ends, sorted
    std::vector<double> z;
    std::vector<Vec3> data; ///< (ix, it, j)
    std::vector<Vec3> g_minus; ///< ρ amplitude at x = −1, per t
    std::vector<Vec3> g_plus;  ///< ρ amplitude at x = +1, per t
    LevelSets levels;

    std::size_t offset(std::size_t ix, std::size_t it) const { return (ix * t.size() + it) * z.size(); }
    Vec3& at(std::size_t ix, std::size_t it, std::size_t j) { return data[offset(ix, it) + j]; }
    const Vec3& at(std::size_t ix, std::size_t it, std::size_t j) const { return data[offset(ix, it) + j]; }

    double tail() const
    {
        double m = 0.0;
        for (std::size_t ix = 0; ix < x.size(); ++ix)
            for (std::size_t it = 0; it < t.size(); ++it) m = std::max(m, norm(at(ix, it, z.size() - 1)));
        return m;
    }
    double max_abs() const
    {
        double m = 0.0;
        for (const auto& v : data) m = std::max(m, ferrolayer::max_abs(v));
        return m;
    }
};

/// Boundary-layer x nodes: `per_end` uniform nodes on [1 − v_gamma_width, 1] and its mirror.
inline std::vector<double> boundary_x_nodes(const LevelSets& ls, int per_end)
{
    if (per_end < 3) throw ValidationError("boundary layer needs at least three x nodes per end");
    std::vector<double> x;
    const double a = 1.0 - ls.v_gamma_width;
    for (int i = 0; i < per_end; ++i) x.push_back(-1.0 + ls.v_gamma_width * i / (per_end - 1));
    for (int i = 0; i < per_end; ++i) x.push_back(a + ls.v_gamma_width * i / (per_end - 1));
    x[static_cast<std::size_t>(per_end) - 1] = -a;
    x.back() = 1.0;
    return x;
}

/// Node data from initial data: u⁰ flowed by (LL0), ∂ₓu⁰ by fourth-order differences of flows.
inline std::vector<BoundaryNodeData> boundary_node_data(const InitialData& data, const LevelSets& ls,
                                                        std::span<const double> x, double T, double dt,
                                                        double dx = 1e-3)
{
    std::vector<BoundaryNodeData> out;
    for (double xi : x) {
        const Side s = xi < 0.0 ? Side::minus : Side::plus;
        const double th = ls.theta(xi);
        auto base = std::make_shared<PointTrajectory>(integrate_point(data.value(s, xi), T, dt));
        BoundaryNodeData d;
        d.u0 = [base](double t) { return base->at(t); };
        if (th == 0.0) {
            d.neumann = [](double) { return Vec3{}; };
        } else {
            auto fl = [&](double xx) { return std::make_shared<PointTrajectory>(integrate_point(data.value(s, xx), T, dt)); };
            auto m2 = fl(xi - 2 * dx), m1 = fl(xi - dx), p1 = fl(xi + dx), p2 = fl(xi + 2 * dx);
            const double sg = xi < 0.0 ? -1.0 : 1.0;
            d.neumann = [=](double t) {
                const Vec3 dxu = (8.0 * (p1->at(t) - m1->at(t)) - (p2->at(t) - m2->at(t))) / (12.0 * dx);
                return (th * sg) * dxu;
            };
        }
        out.push_back(std::move(d));
    }
    return out;
}

/// Crank-Nicolson march of ∂ₜ𝔘 − ∂_z²𝔘 − u⁰∧∂_z²𝔘 = R(𝔘) on [0, Z] for one x node, with
/// ∂_z𝔘 = g at z = 0 (ghost node) and 𝔘 = 0 at z = Z, starting from 𝔘(0) = 0.
/// 𝔘(0) = 0 is incompatible with g(0) ≠ 0, and Crank-Nicolson does not damp the resulting stiff
/// modes, so the first `rannacher_steps` intervals are each taken as two backward Euler half-steps.
inline std::vector<Vec3> march_boundary_node(const BoundaryNodeData& nd, std::span<const double> t,
                                             std::span<const double> z, int rannacher_steps = 4)
{
    const std::size_t nt = t.size(), nz = z.size(), m = nz - 1;
    std::vector<Vec3> out(nt * nz, Vec3{});
    bool all_zero = true;
    for (double tk : t)
        if (!(nd.neumann(tk) == Vec3{})) all_zero = false;
    if (all_zero) return out;

    std::vector<Stencil3> st(m);
    const double h0 = z[1] - z[0];
    st[0] = {0.0, -2.0 / (h0 * h0), 2.0 / (h0 * h0)};
    for (std::size_t j = 1; j < m; ++j) st[j] = d2_central(z[j] - z[j - 1], z[j + 1] - z[j]);

    // θ-step from (ta, old) to tb; θ = ½ is Crank-Nicolson, θ = 1 backward Euler
    auto step = [&](const Vec3* old, Vec3* next, double ta, double tb, double theta) {
        const double dt = tb - ta;
        const Vec3 u0 = nd.u0(ta + theta * dt);
        const Mat3 A = Mat3::identity() + Mat3::cross_matrix(u0);
        const Mat3 R = boundary_rhs_matrix(u0, stray_1d(u0), e1);
        const Vec3 gbar = theta * nd.neumann(tb) + (1.0 - theta) * nd.neumann(ta);
        std::vector<Mat3> L(m), D(m), U(m);
        std::vector<Vec3> rhs(m);
        for (std::size_t j = 0; j < m; ++j) {
            L[j] = (-theta * st[j].a) * A;
            D[j] = (1.0 / dt) * Mat3::identity() - (theta * st[j].b) * A - theta * R;
            U[j] = (-theta * st[j].c) * A;
            const Vec3 um = j > 0 ? old[j - 1] : old[1];
            const Vec3 d2 = st[j].apply(um, old[j], old[j + 1]);
            rhs[j] = old[j] / dt + (1.0 - theta) * (A * d2) + (1.0 - theta) * (R * old[j]);
        }
        // ghost 𝔘_{−1} = 𝔘_1 − 2h₀g contributes −2g/h₀ to ∂_z² at z = 0 (both time levels)
        rhs[0] += A * ((-2.0 / h0) * gbar);
        BlockTridiagFactor lu(L, D, U);
        lu.solve(std::span<Vec3>(rhs));
        for (std::size_t j = 0; j < m; ++j) next[j] = rhs[j];
        next[m] = Vec3{};
    };

    std::vector<Vec3> half(nz);
    for (std::size_t it = 0; it + 1 < nt; ++it) {
        const Vec3* old = &out[it * nz];
        Vec3* next = &out[(it + 1) * nz];
        if (static_cast<int>(it) < rannacher_steps) {
            const double tm = 0.5 * (t[it] + t[it + 1]);
            step(old, half.data(), t[it], tm, 1.0);
            step(half.data(), next, tm, t[it + 1], 1.0);
        } else {
            step(old, next, t[it], t[it + 1], 0.5);
        }
    }
    return out;
}

inline void build_rho(BoundaryProfile& bp);

/// Solves the boundary-layer problem on every x node of V_Γ and builds the ρ amplitudes
/// g± = −∂_𝔫𝔘(t, ±1, 0) by one-sided second-order differences over the x nodes.
inline BoundaryProfile solve_boundary_profile(const std::vector<BoundaryNodeData>& nodes, std::span<const double> x,
                                              const LevelSets& ls, std::span<const double> t,
                                              std::span<const double> z, int jobs = 1)
{
    if (nodes.size() != x.size()) throw ValidationError("boundary node data and x nodes differ in length");
    if (z.size() < 3) throw ValidationError("boundary layer needs at least three z nodes");
    BoundaryProfile bp;
    bp.t.assign(t.begin(), t.end());
    bp.x.assign(x.begin(), x.end());
    bp.z.assign(z.begin(), z.end());
    bp.levels = ls;
    bp.data.assign(x.size() * t.size() * z.size(), Vec3{});
    parallel_for(x.size(), jobs, [&](std::size_t ix) {
        const auto col = march_boundary_node(nodes[ix], t, z);
        std::copy(col.begin(), col.end(), bp.data.begin() + static_cast<std::ptrdiff_t>(bp.offset(ix, 0)));
    });
    build_rho(bp);
    return bp;
}

/// Fills g± from 𝔘: ρ(t, x) = −g±(t)(1 − |x|)θ(x), so ∂_𝔫ρ = g± = −∂_𝔫𝔘(t, ±1, 0).
inline void build_rho(BoundaryProfile& bp)
{
    const std::size_t nt = bp.t.size(), nx = bp.x.size();
    bp.g_minus.assign(nt, Vec3{});
    bp.g_plus.assign(nt, Vec3{});
    if (nx < 6) return;
    const auto& x = bp.x;
    for (std::size_t it = 0; it < nt; ++it) {
        // x = −1: ∂_𝔫 = −∂ₓ
        const Vec3 dxm = d1_forward(x[1] - x[0], x[2] - x[1]).apply(bp.at(0, it, 0), bp.at(1, it, 0), bp.at(2, it, 0));
        bp.g_minus[it] = dxm; // −∂_𝔫𝔘 = ∂ₓ𝔘
        // x = +1: ∂_𝔫 = +∂ₓ, backward difference
        const std::size_t n = nx - 1;
        const Vec3 dxp = -1.0 * d1_forward(x[n] - x[n - 1], x[n - 1] - x[n - 2])
                                    .apply(bp.at(n, it, 0), bp.at(n - 1, it, 0), bp.at(n - 2, it, 0));
        bp.g_plus[it] = -1.0 * dxp;
    }
}

/// ρ(t, x) at a profile time index.
inline Vec3 rho_at(const BoundaryProfile& bp, std::size_t it, double x)
{
    const double th = bp.levels.theta(x);
    if (th == 0.0 || bp.g_plus.empty()) return {};
    const Vec3& g = x < 0.0 ? bp.g_minus[it] : bp.g_plus[it];
    return (-(1.0 - std::fabs(x)) * th) * g;
}

} // namespace ferrolayer
