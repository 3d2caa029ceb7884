#pragma once

#include "ferrolayer/errors.hpp"
#include "ferrolayer/full_model.hpp"
#include "ferrolayer/geometry.hpp"
#include "ferrolayer/layer_boundary.hpp"
#include "ferrolayer/layer_internal.hpp"
#include "ferrolayer/limit_model.hpp"
#include "ferrolayer/numerics.hpp"
#include "ferrolayer/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace ferrolayer {

// ---------------------------------------------------------------------------------------------
// Ansatz
// ---------------------------------------------------------------------------------------------

/// u⁰ on a single-valued grid: one flow per node, two at the interface node.
struct LimitOnGrid {
    std::vector<double> x;
    std::vector<PointTrajectory> own;
    std::size_t interface_index = 0;
    PointTrajectory at_interface[2];

    LimitOnGrid(const InitialData& data, std::span<const double> nodes, double T, double dt)
        : x(nodes.begin(), nodes.end())
    {
        own.reserve(x.size());
        for (std::size_t i = 0; i < x.size(); ++i) {
            if (x[i] == 0.0) {
                interface_index = i;
                at_interface[0] = integrate_point(data.value(Side::minus, 0.0), T, dt);
                at_interface[1] = integrate_point(data.value(Side::plus, 0.0), T, dt);
                own.push_back(at_interface[0]);
                continue;
            }
            own.push_back(integrate_point(data.value(x[i] < 0.0 ? Side::minus : Side::plus, x[i]), T, dt));
        }
    }

    /// u⁰(t, x_i); at the interface node the side must be given.
    Vec3 value(std::size_t i, double t, Side s = Side::minus) const
    {
        if (x[i] == 0.0) return at_interface[side_index(s)].at(t);
        return own[i].at(t);
    }
};

/// u^{ε,app}(t, x) = 𝒰(t, x, ψ(x)/ε) + ε(𝔘(t, x, φ(x)/ε) + ρ(t, x)) on a single-valued grid, where
/// 𝒰 = u⁰± + 𝒰± and 𝒰± → 0 beyond |y| = Y. The interface node takes the mean of both sides.
class ExpansionAnsatz {
public:
    ExpansionAnsatz(const ProfilePair& internal, const BoundaryProfile& boundary, const LimitOnGrid& u0, double epsilon,
                    double v_sigma_halfwidth)
        : in_(internal), bd_(boundary), u0_(u0), eps_(epsilon), hw_(v_sigma_halfwidth)
    {
        if (!(epsilon > 0.0)) throw ValidationError("ansatz needs epsilon > 0");
        has_internal_ = internal.U.nx() > 0 && internal.U.max_abs() > 0.0;
        has_boundary_ = !boundary.x.empty() && (boundary.max_abs() > 0.0);
        if (has_internal_ && internal.U.t.back() + 1e-12 < 0.0) throw ValidationError("profile time grid is empty");
    }

    double epsilon() const { return eps_; }

    std::vector<Vec3> evaluate(double t) const
    {
        const std::size_t n = u0_.x.size();
        std::vector<Vec3> out(n);
        std::vector<Vec3> slab;
        if (has_internal_) slab = internal_slab(t);
        std::vector<Vec3> bslab;
        LagrangeStencil bt;
        if (has_boundary_) {
            bslab = boundary_slab(t);
            bt = lagrange4(bd_.t, t);
        }
        for (std::size_t i = 0; i < n; ++i) {
            const double x = u0_.x[i];
            if (x == 0.0) {
                const Vec3 a = u0_.value(i, t, Side::minus) + internal_at(slab, 0, x);
                const Vec3 b = u0_.value(i, t, Side::plus) + internal_at(slab, 1, x);
                out[i] = 0.5 * (a + b);
            } else {
                const int s = x < 0.0 ? 0 : 1;
                out[i] = u0_.value(i, t) + internal_at(slab, s, x);
            }
            if (has_boundary_) out[i] += eps_ * boundary_at(bslab, bt, x);
        }
        return out;
    }

private:
    // 𝒰 interpolated in t onto the profile (x, side, η) nodes
    std::vector<Vec3> internal_slab(double t) const
    {
        const auto& U = in_.U;
        const auto st = lagrange4(U.t, std::min(t, U.t.back()));
        std::vector<Vec3> s(U.nx() * U.slice(), Vec3{});
        for (std::size_t ix = 0; ix < U.nx(); ++ix)
            for (std::size_t k = 0; k < st.count; ++k) {
                const Vec3* src = &U.data[U.offset(ix, st.first + k, 0)];
                Vec3* dst = &s[ix * U.slice()];
                for (std::size_t j = 0; j < U.slice(); ++j) dst[j] += st.w[k] * src[j];
            }
        return s;
    }

    Vec3 internal_at(const std::vector<Vec3>& slab, int side, double x) const
    {
        if (!has_internal_ || std::fabs(x) >= hw_) return {};
        const auto& U = in_.U;
        const double eta = std::fabs(x) / eps_;
        if (eta > U.eta.back()) return {};
        if (x < U.x.front() || x > U.x.back()) return {};
        const auto sx = lagrange4(U.x, x);
        const auto sy = lagrange4(U.eta, eta);
        Vec3 r{};
        for (std::size_t a = 0; a < sx.count; ++a) {
            const Vec3* row = &slab[(sx.first + a) * U.slice() + static_cast<std::size_t>(side) * U.ny()];
            Vec3 v{};
            for (std::size_t b = 0; b < sy.count; ++b) v += sy.w[b] * row[sy.first + b];
            r += sx.w[a] * v;
        }
        return r;
    }

    std::vector<Vec3> boundary_slab(double t) const
    {
        const auto st = lagrange4(bd_.t, std::min(t, bd_.t.back()));
        const std::size_t nz = bd_.z.size();
        std::vector<Vec3> s(bd_.x.size() * nz, Vec3{});
        for (std::size_t ix = 0; ix < bd_.x.size(); ++ix)
            for (std::size_t k = 0; k < st.count; ++k)
                for (std::size_t j = 0; j < nz; ++j) s[ix * nz + j] += st.w[k] * bd_.at(ix, st.first + k, j);
        return s;
    }

    Vec3 boundary_at(const std::vector<Vec3>& slab, const LagrangeStencil& bt, double x) const
    {
        const auto& ls = bd_.levels;
        if (!ls.in_v_gamma(x)) return {};
        const std::size_t half = bd_.x.size() / 2;
        std::span<const double> xs(bd_.x.data() + (x < 0.0 ? 0 : half), half);
        const std::size_t base = x < 0.0 ? 0 : half;
        const double z = ls.phi(x) / eps_;
        Vec3 r{};
        if (z <= bd_.z.back()) {
            const auto sx = lagrange4(xs, x);
            const auto sz = lagrange4(bd_.z, z);
            const std::size_t nz = bd_.z.size();
            for (std::size_t a = 0; a < sx.count; ++a) {
                Vec3 v{};
                for (std::size_t b = 0; b < sz.count; ++b) v += sz.w[b] * slab[(base + sx.first + a) * nz + sz.first + b];
                r += sx.w[a] * v;
            }
        }
        // ρ with g± interpolated in t
        const double th = ls.theta(x);
        if (th != 0.0) {
            Vec3 g{};
            const auto& gs = x < 0.0 ? bd_.g_minus : bd_.g_plus;
            for (std::size_t k = 0; k < bt.count; ++k) g += bt.w[k] * gs[bt.first + k];
            r += (-(1.0 - std::fabs(x)) * th) * g;
        }
        return r;
    }

    const ProfilePair& in_;
    const BoundaryProfile& bd_;
    const LimitOnGrid& u0_;
    double eps_;
    double hw_;
    bool has_internal_ = false;
    bool has_boundary_ = false;
};

inline ExpansionAnsatz assemble_ansatz(const ProfilePair& internal, const BoundaryProfile& boundary,
                                       const LimitOnGrid& u0, double epsilon, double v_sigma_halfwidth)
{
    return ExpansionAnsatz(internal, boundary, u0, epsilon, v_sigma_halfwidth);
}

// ---------------------------------------------------------------------------------------------
// Space-time error
// ---------------------------------------------------------------------------------------------

/// Streaming ‖a − b‖_{L²([0,T]×Ω)} over two-sided fields: trapezoid in t, trapezoid over each
/// side's own nodes in x (so the interface node carries half a cell from each side).
class SpaceTimeL2 {
public:
    void add(double t, const MagnetizationField& a, const MagnetizationField& b)
    {
        double s = 0.0;
        for (int side = 0; side < 2; ++side) {
            const auto& x = side == 0 ? a.x_minus : a.x_plus;
            const auto& va = side == 0 ? a.minus : a.plus;
            const auto& vb = side == 0 ? b.minus : b.plus;
            if (vb.size() != va.size()) throw ValidationError("trajectories are sampled on different grids");
            const auto w = weights(side, x);
            for (std::size_t i = 0; i < va.size(); ++i) s += w[i] * norm2(va[i] - vb[i]);
        }
        if (have_prev_) {
            if (!(t > prev_t_)) throw ValidationError("trajectory times must increase");
            acc_ += 0.5 * (t - prev_t_) * (s + prev_s_);
        }
        prev_t_ = t;
        prev_s_ = s;
        have_prev_ = true;
    }

    double value() const { return std::sqrt(acc_); }

private:
    const std::vector<double>& weights(int side, const std::vector<double>& x)
    {
        auto& w = side == 0 ? wm_ : wp_;
        if (w.size() != x.size()) w = trapezoid_weights(x);
        return w;
    }

    std::vector<double> wm_, wp_;
    double acc_ = 0.0, prev_t_ = 0.0, prev_s_ = 0.0;
    bool have_prev_ = false;
};

inline double l2_space_time_error(std::span<const double> times, std::span<const MagnetizationField> a,
                                  std::span<const MagnetizationField> b)
{
    if (a.size() != times.size() || b.size() != times.size()) throw ValidationError("trajectory lengths differ");
    SpaceTimeL2 acc;
    for (std::size_t n = 0; n < times.size(); ++n) acc.add(times[n], a[n], b[n]);
    return acc.value();
}

// ---------------------------------------------------------------------------------------------
// E-class norms
// ---------------------------------------------------------------------------------------------

/// The five summands of ‖w‖_m + ‖ε∂_𝔫w‖_m + ε(‖w‖_∞ + ‖Zw‖_∞ + ‖ε∂_𝔫w‖_∞).
struct EClassNorms {
    double conormal = 0.0;    ///< ‖w‖_m
    double normal = 0.0;      ///< ‖ε∂_𝔫w‖_m
    double sup = 0.0;         ///< ε‖w‖_∞
    double sup_z = 0.0;       ///< ε‖Zw‖_∞ over Z ∈ {∂ₜ, x(1−x²)∂ₓ}
    double sup_normal = 0.0;  ///< ε‖ε∂_𝔫w‖_∞

    double total() const { return conormal + normal + sup + sup_z + sup_normal; }
};

/// Space-time samples of a single-valued field: history[n][i] at (times[n], x[i]).
struct FieldHistory {
    std::vector<double> times;
    std::vector<double> x;
    std::vector<std::vector<Vec3>> values;
};

namespace detail {

inline std::vector<Vec3> diff_nodes(std::span<const double> x, std::span<const Vec3> v)
{
    const std::size_t n = x.size();
    std::vector<Vec3> d(n);
    if (n < 3) return d;
    d[0] = d1_forward(x[1] - x[0], x[2] - x[1]).apply(v[0], v[1], v[2]);
    for (std::size_t i = 1; i + 1 < n; ++i) d[i] = d1_central(x[i] - x[i - 1], x[i + 1] - x[i]).apply(v[i - 1], v[i], v[i + 1]);
    d[n - 1] = -1.0 * d1_forward(x[n - 1] - x[n - 2], x[n - 2] - x[n - 3]).apply(v[n - 1], v[n - 2], v[n - 3]);
    return d;
}

inline FieldHistory apply_dx(const FieldHistory& h, double scale, bool conormal)
{
    FieldHistory r = h;
    for (std::size_t n = 0; n < h.values.size(); ++n) {
        r.values[n] = diff_nodes(h.x, h.values[n]);
        for (std::size_t i = 0; i < h.x.size(); ++i)
            r.values[n][i] = (conormal ? scale * conormal_weight(h.x[i]) : scale) * r.values[n][i];
    }
    return r;
}

inline FieldHistory apply_dt(const FieldHistory& h)
{
    FieldHistory r = h;
    const std::size_t nt = h.times.size();
    std::vector<Vec3> col(nt);
    for (std::size_t i = 0; i < h.x.size(); ++i) {
        for (std::size_t n = 0; n < nt; ++n) col[n] = h.values[n][i];
        const auto d = diff_nodes(h.times, col);
        for (std::size_t n = 0; n < nt; ++n) r.values[n][i] = d[n];
    }
    return r;
}

inline double l2_norm(const FieldHistory& h)
{
    const auto wt = trapezoid_weights(h.times);
    const auto wx = trapezoid_weights(h.x);
    double s = 0.0;
    for (std::size_t n = 0; n < h.times.size(); ++n)
        for (std::size_t i = 0; i < h.x.size(); ++i) s += wt[n] * wx[i] * norm2(h.values[n][i]);
    return std::sqrt(s);
}

inline double sup_norm(const FieldHistory& h)
{
    double m = 0.0;
    for (const auto& row : h.values)
        for (const auto& v : row) m = std::max(m, norm(v));
    return m;
}

/// (Σ_{a+b≤m} ‖∂ₜᵃ Zᵇ v‖²)^{1/2}
inline double conormal_norm(const FieldHistory& v, int m)
{
    double s = 0.0;
    FieldHistory zb = v; // Z^b v
    for (int b = 0; b <= m; ++b) {
        FieldHistory ta = zb; // ∂ₜ^a Z^b v
        for (int a = 0; a + b <= m; ++a) {
            const double n = l2_norm(ta);
            s += n * n;
            if (a + b < m) ta = apply_dt(ta);
        }
        if (b < m) zb = apply_dx(zb, 1.0, true);
    }
    return std::sqrt(s);
}

} // namespace detail

/// Discrete E-class summands for w on a space-time grid. Z₀ = ∂ₜ, Z = x(1−x²)∂ₓ. Only |∂_𝔫w|
/// enters the norms, so ∂_𝔫 is evaluated as ∂ₓ (the sign convention does not change them).
inline EClassNorms eclass_norms(const FieldHistory& w, double epsilon, int m)
{
    if (m < 0 || m > 2) throw ValidationError("E-class norms support 0 <= m <= 2");
    if (w.times.size() < 3 || w.x.size() < 3) throw ValidationError("E-class norms need at least three samples per axis");
    EClassNorms r;
    const auto dn = detail::apply_dx(w, epsilon, false);
    r.conormal = detail::conormal_norm(w, m);
    r.normal = detail::conormal_norm(dn, m);
    r.sup = epsilon * detail::sup_norm(w);
    r.sup_z = epsilon * std::max(detail::sup_norm(detail::apply_dt(w)), detail::sup_norm(detail::apply_dx(w, 1.0, true)));
    r.sup_normal = epsilon * detail::sup_norm(dn);
    return r;
}

// ---------------------------------------------------------------------------------------------
// Convergence study
// ---------------------------------------------------------------------------------------------

struct ScenarioConfig {
    std::string name = "scenario";
    InitialData data = InitialData::constant({0.6, 0.8, 0.0}, {-0.6, 0.8, 0.0});
    LevelSets levels{};
    double T = 0.5;
    double dt_full = 1e-3;
    double dt_limit = 1e-3;
    int cells_per_eps = 16;
    int max_cells_per_side = 1 << 16;
    double theta_scheme = 0.5;
    CrossTerm cross_term = CrossTerm::lagged_implicit;
    ProfileGridSpec profile{};
    int profile_x_nodes = 33;
    int boundary_x_nodes = 17;
    double z_max = 15.0;
    PicardOptions picard{};
    int max_T_halvings = 4;
    std::vector<double> epsilons{0.1, 0.05, 0.025, 0.0125};
    int jobs = 1;

    void validate() const
    {
        levels.validate();
        if (epsilons.size() < 3) throw ValidationError("convergence study needs at least three epsilon values");
        for (std::size_t i = 0; i < epsilons.size(); ++i) {
            if (!(epsilons[i] > 0.0)) throw ValidationError("epsilon values must be positive");
            if (i > 0 && !(epsilons[i] < epsilons[i - 1])) throw ValidationError("epsilon values must be strictly decreasing");
        }
        if (!(T > 0.0)) throw ValidationError("T must be positive");
        if (cells_per_eps < 8) throw ValidationError("unresolved layer: cells_per_eps must be at least 8");
        if (profile_x_nodes < 4) throw ValidationError("profile_x_nodes must be at least 4");
    }
};

/// ε-independent layer data shared by every ε of a study.
struct Layers {
    ExtendedPair u0pm;
    ProfilePair internal;
    BoundaryProfile boundary;
    double T_used = 0.0;
    int T_halvings = 0;
};

inline std::vector<double> profile_x_nodes(const LevelSets& ls, int count)
{
    std::vector<double> x(static_cast<std::size_t>(count));
    for (int i = 0; i < count; ++i) x[static_cast<std::size_t>(i)] = -ls.v_sigma_halfwidth + 2.0 * ls.v_sigma_halfwidth * i / (count - 1);
    if (count % 2 == 1) x[static_cast<std::size_t>(count / 2)] = 0.0;
    return x;
}

inline BoundaryProfile build_boundary_layer(const ScenarioConfig& sc, double T)
{
    const auto bx = boundary_x_nodes(sc.levels, sc.boundary_x_nodes);
    const auto nodes = boundary_node_data(sc.data, sc.levels, bx, T, sc.dt_limit);
    const auto t = sc.profile.times(T);
    const auto z = stretched_nodes(sc.z_max, sc.profile.h_min, sc.profile.stretch, sc.profile.h_max);
    return solve_boundary_profile(nodes, bx, sc.levels, t, z, sc.jobs);
}

/// Internal and boundary profiles on [0, T_used]; T_used = T unless the Picard iteration stops
/// contracting, in which case the horizon is halved (up to max_T_halvings times).
inline Layers build_layers(const ScenarioConfig& sc)
{
    sc.levels.validate();
    Layers L;
    const auto px = profile_x_nodes(sc.levels, sc.profile_x_nodes);
    double T = sc.T;
    for (int k = 0;; ++k) {
        try {
            L.u0pm = extend_u0_pm(sc.data, sc.levels, px, T, sc.dt_limit);
            PicardOptions opt = sc.picard;
            opt.jobs = sc.jobs;
            L.internal = picard_profiles(L.u0pm, sc.profile, T, opt);
            L.internal.v_sigma_halfwidth = sc.levels.v_sigma_halfwidth;
            break;
        } catch (const NonContraction&) {
            if (k >= sc.max_T_halvings) throw;
            T *= 0.5;
            L.T_halvings = k + 1;
        }
    }
    L.T_used = T;
    L.boundary = build_boundary_layer(sc, T);
    return L;
}

struct EpsilonResult {
    double epsilon = 0.0;
    int cells_per_side = 0;
    double dt = 0.0;
    double T_used = 0.0;
    double err_l2 = 0.0;
    double residual_l2 = 0.0;
    double residual_max = 0.0;
    double ansatz_neumann_defect = 0.0; ///< one-sided ∂ₓ of the ansatz on Γ at t = T_used
    EClassNorms eclass[3];
    double max_drift = 0.0;
    int rejections = 0;
};

struct ConvergenceReport {
    std::vector<EpsilonResult> rows;
    std::vector<double> slope_running; ///< slope fitted on rows 0..i (NaN for i = 0)
    double slope = 0.0;
    double T_used = 0.0;
    int T_halvings = 0;
    PicardTrace trace;
};

/// Full-model run for one ε from the ansatz at t = 0, with error, ansatz residual and E-class
/// diagnostics of w = (u^ε − ã^ε)/ε.
inline EpsilonResult run_epsilon(const ScenarioConfig& sc, const Layers& L, double eps)
{
    const int cells = static_cast<int>(std::ceil(sc.cells_per_eps / eps - 1e-9));
    if (cells > sc.max_cells_per_side || cells * eps < 8.0)
        throw ValidationError("unresolved layer: epsilon " + std::to_string(eps) + " needs more than max_cells_per_side cells");
    SlabConfig scfg;
    scfg.cells_per_side = cells;
    const SlabDomain dom(scfg);
    const auto nodes = dom.merged_nodes();

    FullModelConfig fc;
    fc.epsilon = eps;
    fc.dt = sc.dt_full;
    fc.T = L.T_used;
    fc.theta_scheme = sc.theta_scheme;
    fc.cross_term = sc.cross_term;
    const FullModel model{FullGrid(nodes), fc};

    const LimitOnGrid u0(sc.data, nodes, L.T_used, sc.dt_limit);
    const ExpansionAnsatz ans(L.internal, L.boundary, u0, eps, sc.levels.v_sigma_halfwidth);

    auto init = ans.evaluate(0.0);
    for (auto& v : init) v = normalized(v);

    EpsilonResult r;
    r.epsilon = eps;
    r.cells_per_side = cells;
    r.T_used = L.T_used;

    SpaceTimeL2 err;
    ResidualAccumulator res(model);
    FieldHistory w;
    w.x = nodes;
    auto two_sided_limit = [&](double t) {
        auto f = MagnetizationField::on(dom);
        const std::size_t nm = f.minus.size();
        for (std::size_t i = 0; i < nm; ++i) f.minus[i] = u0.value(i, t, Side::minus);
        for (std::size_t i = 0; i < f.plus.size(); ++i) f.plus[i] = u0.value(nm - 1 + i, t, Side::plus);
        return f;
    };
    auto observer = [&](double t, std::span<const Vec3> u) {
        const auto a = ans.evaluate(t);
        res.add_state(t, a);
        err.add(t, split_single(dom, u, t), two_sided_limit(t));
        std::vector<Vec3> wn(u.size());
        for (std::size_t i = 0; i < u.size(); ++i) wn[i] = (u[i] - a[i]) / eps;
        w.times.push_back(t);
        w.values.push_back(std::move(wn));
    };
    const auto traj = simulate_full(model, std::move(init), 0, observer);
    r.dt = L.T_used / std::max<std::size_t>(1, w.times.size() - 1);
    r.max_drift = traj.stats.max_drift;
    r.rejections = traj.stats.rejections;
    r.err_l2 = err.value();
    const auto rep = res.report();
    r.residual_l2 = rep.l2_residual;
    r.residual_max = rep.max_residual;
    // at t = 0 the defect is |∂_𝔫u⁰| because 𝔘(0) = 0; the final time shows the cancellation
    {
        const FullGrid g(nodes);
        const auto aT = ans.evaluate(L.T_used);
        r.ansatz_neumann_defect = std::max(max_abs(g.one_sided_dx(aT, 0)), max_abs(g.one_sided_dx(aT, 1)));
    }
    for (int m = 0; m <= 2; ++m) r.eclass[m] = eclass_norms(w, eps, m);
    return r;
}

inline ConvergenceReport assemble_report(std::vector<EpsilonResult> rows, const Layers& L)
{
    ConvergenceReport rep;
    rep.rows = std::move(rows);
    rep.T_used = L.T_used;
    rep.T_halvings = L.T_halvings;
    rep.trace = L.internal.trace;
    std::vector<double> e, v;
    for (const auto& r : rep.rows) {
        e.push_back(r.epsilon);
        v.push_back(r.err_l2);
        rep.slope_running.push_back(e.size() >= 2 ? loglog_slope(e, v) : std::numeric_limits<double>::quiet_NaN());
    }
    rep.slope = rep.slope_running.back();
    return rep;
}

/// Runs every ε (concurrently with sc.jobs workers) against shared layer data.
inline ConvergenceReport convergence_study(const ScenarioConfig& sc)
{
    sc.validate();
    const Layers L = build_layers(sc);
    std::vector<EpsilonResult> rows(sc.epsilons.size());
    ScenarioConfig inner = sc;
    inner.jobs = 1;
    parallel_for(sc.epsilons.size(), sc.jobs, [&](std::size_t i) { rows[i] = run_epsilon(inner, L, sc.epsilons[i]); });
    return assemble_report(std::move(rows), L);
}

} // namespace ferrolayer
