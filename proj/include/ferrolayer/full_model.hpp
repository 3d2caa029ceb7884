#pragma once

#include "ferrolayer/block_tridiag.hpp"
#include "ferrolayer/errors.hpp"
#include "ferrolayer/geometry.hpp"
#include "ferrolayer/numerics.hpp"
#include "ferrolayer/strayfield.hpp"
#include "ferrolayer/vec3.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace ferrolayer {

/// |V|²u + u∧H − u∧(u∧H)
inline Vec3 F_rhs(const Vec3& u, const Vec3& V, const Vec3& H)
{
    return norm2(V) * u + cross(u, H) - cross(u, cross(u, H));
}

enum class CrossTerm { explicit_term, lagged_implicit };

struct FullModelConfig {
    double epsilon = 0.1;
    double dt = 1e-3;
    double T = 0.5;
    double theta_scheme = 0.5;
    CrossTerm cross_term = CrossTerm::lagged_implicit;
    int max_halvings = 10;
    double max_drift = 1e-3;

    void validate() const
    {
        if (!(epsilon >= 0.0)) throw ValidationError("epsilon must be non-negative");
        if (!(dt > 0.0)) throw ValidationError("dt must be positive");
        if (!(T >= 0.0)) throw ValidationError("T must be non-negative");
        if (!(theta_scheme >= 0.0 && theta_scheme <= 1.0)) throw ValidationError("theta_scheme must lie in [0, 1]");
        if (max_halvings < 0) throw ValidationError("max_halvings must be non-negative");
    }
};

/// Single-valued grid with the discrete operators of the full model. Homogeneous Neumann data
/// enter through the reflected ghost u_{-1} = u_1, u_{N+1} = u_{N-1}.
struct FullGrid {
    std::vector<double> x;
    std::vector<Stencil3> d1;
    std::vector<Stencil3> d2;
    std::vector<double> weights;

    explicit FullGrid(std::vector<double> nodes) : x(std::move(nodes))
    {
        const std::size_t n = x.size();
        if (n < 3) throw ValidationError("full model grid needs at least three nodes");
        d1.resize(n);
        d2.resize(n);
        for (std::size_t i = 1; i + 1 < n; ++i) {
            const double hm = x[i] - x[i - 1], hp = x[i + 1] - x[i];
            if (!(hm > 0.0 && hp > 0.0)) throw ValidationError("full model nodes must increase strictly");
            d1[i] = d1_central(hm, hp);
            d2[i] = d2_central(hm, hp);
        }
        const double h0 = x[1] - x[0], hn = x[n - 1] - x[n - 2];
        d1[0] = {0.0, 0.0, 0.0};
        d1[n - 1] = {0.0, 0.0, 0.0};
        d2[0] = {0.0, -2.0 / (h0 * h0), 2.0 / (h0 * h0)};
        d2[n - 1] = {2.0 / (hn * hn), -2.0 / (hn * hn), 0.0};
        weights = trapezoid_weights(x);
    }

    std::size_t size() const { return x.size(); }

    /// Applies a stencil family with ghost reflection at the ends.
    std::vector<Vec3> apply(const std::vector<Stencil3>& st, std::span<const Vec3> u) const
    {
        const std::size_t n = u.size();
        std::vector<Vec3> r(n);
        for (std::size_t i = 0; i < n; ++i) {
            const Vec3& um = i > 0 ? u[i - 1] : u[1];
            const Vec3& up = i + 1 < n ? u[i + 1] : u[n - 2];
            r[i] = st[i].apply(um, u[i], up);
        }
        return r;
    }
    std::vector<Vec3> lap(std::span<const Vec3> u) const { return apply(d2, u); }
    std::vector<Vec3> grad(std::span<const Vec3> u) const { return apply(d1, u); }

    /// Second-order one-sided x-derivative at the left (end = 0) or right (end = 1) boundary.
    Vec3 one_sided_dx(std::span<const Vec3> u, int end) const
    {
        const std::size_t n = u.size();
        if (end == 0) return d1_forward(x[1] - x[0], x[2] - x[1]).apply(u[0], u[1], u[2]);
        return -1.0 * d1_forward(x[n - 1] - x[n - 2], x[n - 2] - x[n - 3]).apply(u[n - 1], u[n - 2], u[n - 3]);
    }
};

/// Two-sided field → single-valued grid; the duplicated interface node is averaged.
inline std::vector<Vec3> merge_two_sided(const MagnetizationField& f)
{
    std::vector<Vec3> u(f.minus.begin(), f.minus.end());
    u.back() = 0.5 * (f.minus.back() + f.plus.front());
    u.insert(u.end(), f.plus.begin() + 1, f.plus.end());
    return u;
}

inline std::vector<double> merged_nodes(const MagnetizationField& f)
{
    std::vector<double> x(f.x_minus.begin(), f.x_minus.end());
    x.insert(x.end(), f.x_plus.begin() + 1, f.x_plus.end());
    return x;
}

/// Single-valued values split back onto the two sides (interface value copied).
inline MagnetizationField split_single(const SlabDomain& d, std::span<const Vec3> u, double time)
{
    auto f = MagnetizationField::on(d);
    const std::size_t nm = f.minus.size();
    if (u.size() != nm + f.plus.size() - 1) throw ValidationError("field size does not match the domain");
    for (std::size_t i = 0; i < nm; ++i) f.minus[i] = u[i];
    for (std::size_t i = 0; i < f.plus.size(); ++i) f.plus[i] = u[nm - 1 + i];
    f.time = time;
    return f;
}

/// Optional manufactured forcing S(t, x) added to the right side.
using SourceFn = std::function<Vec3(double, double)>;

struct StepStats {
    double max_drift = 0.0; ///< pre-renormalization norm defect of accepted steps
    int rejections = 0;
    int accepted_substeps = 0;
};

/// IMEX stepper for ∂ₜu − ε²Δu − ε²u∧Δu = F(u, ε∂ₓu, ℋ(u)).
/// Predictor: θ-scheme with coefficients and F at uⁿ. Corrector: the same with coefficients and
/// F at ½(uⁿ + u*); for θ = ½ the step is second order.
class FullModel {
public:
    FullModel(FullGrid grid, FullModelConfig cfg, SourceFn source = {})
        : grid_(std::move(grid)), cfg_(cfg), source_(std::move(source))
    {
        cfg_.validate();
    }

    const FullGrid& grid() const { return grid_; }
    const FullModelConfig& config() const { return cfg_; }

    /// Advances u from t by dt, halving on drift rejection.
    void step(std::vector<Vec3>& u, double t, double dt, StepStats& stats, int depth = 0) const
    {
        double drift = 0.0;
        auto next = attempt(u, t, dt, drift);
        if (drift <= cfg_.max_drift) {
            for (auto& v : next) v = normalized(v);
            u = std::move(next);
            stats.max_drift = std::max(stats.max_drift, drift);
            ++stats.accepted_substeps;
            return;
        }
        ++stats.rejections;
        if (depth >= cfg_.max_halvings)
            throw SolverAbort("step rejected after " + std::to_string(cfg_.max_halvings) + " halvings at t=" + std::to_string(t));
        step(u, t, 0.5 * dt, stats, depth + 1);
        step(u, t + 0.5 * dt, 0.5 * dt, stats, depth + 1);
    }

    /// One unrenormalized predictor-corrector step; `drift` receives max | |u| − 1 |.
    std::vector<Vec3> attempt(std::span<const Vec3> un, double t, double dt, double& drift) const
    {
        auto star = stage(un, un, t, dt);
        std::vector<Vec3> mid(un.size());
        for (std::size_t i = 0; i < un.size(); ++i) mid[i] = 0.5 * (un[i] + star[i]);
        auto next = stage(un, mid, t + 0.5 * dt, dt);
        drift = 0.0;
        for (const auto& v : next) drift = std::max(drift, std::fabs(norm(v) - 1.0));
        return next;
    }

    /// Pointwise right side F(c, εD₁c, ℋ(c)) (+ source).
    std::vector<Vec3> forcing(std::span<const Vec3> c, double t) const
    {
        const double eps = cfg_.epsilon;
        auto g = grid_.grad(c);
        std::vector<Vec3> f(c.size());
        for (std::size_t i = 0; i < c.size(); ++i) {
            f[i] = F_rhs(c[i], eps * g[i], stray_1d(c[i]));
            if (source_) f[i] += source_(t, grid_.x[i]);
        }
        return f;
    }

private:
    // Solves (I/dt − θε²A(c)D²)u = un/dt + (1−θ)ε²A(c)D²un + F(c) with A(c) = I + [c]× (lagged)
    // or the scalar system with ε²c∧D²c explicit.
    std::vector<Vec3> stage(std::span<const Vec3> un, std::span<const Vec3> c, double t_eval, double dt) const
    {
        const std::size_t n = un.size();
        const double e2 = cfg_.epsilon * cfg_.epsilon;
        const double th = cfg_.theta_scheme;
        const auto lap_n = grid_.lap(un);
        auto rhs = forcing(c, t_eval);
        const bool lagged = cfg_.cross_term == CrossTerm::lagged_implicit;
        std::vector<Vec3> lap_c;
        if (!lagged) lap_c = grid_.lap(c);
        for (std::size_t i = 0; i < n; ++i) {
            if (lagged)
                rhs[i] += un[i] / dt + (1.0 - th) * e2 * (lap_n[i] + cross(c[i], lap_n[i]));
            else
                rhs[i] += un[i] / dt + (1.0 - th) * e2 * lap_n[i] + e2 * cross(c[i], lap_c[i]);
        }
        if (th == 0.0 || e2 == 0.0) {
            for (auto& v : rhs) v = dt * v;
            return rhs;
        }
        // ghost reflection moves the off-grid weight onto the interior neighbour
        auto coeffs = [&](std::size_t i, double& a, double& b, double& cc) {
            a = grid_.d2[i].a;
            b = grid_.d2[i].b;
            cc = grid_.d2[i].c;
        };
        if (lagged) {
            std::vector<Mat3> L(n), D(n), U(n);
            for (std::size_t i = 0; i < n; ++i) {
                double a, b, cc;
                coeffs(i, a, b, cc);
                const Mat3 A = Mat3::identity() + Mat3::cross_matrix(c[i]);
                L[i] = (-th * e2 * a) * A;
                D[i] = (1.0 / dt) * Mat3::identity() - (th * e2 * b) * A;
                U[i] = (-th * e2 * cc) * A;
            }
            BlockTridiagFactor lu(L, D, U);
            lu.solve(std::span<Vec3>(rhs));
        } else {
            std::vector<double> lo(n), di(n), up(n);
            for (std::size_t i = 0; i < n; ++i) {
                double a, b, cc;
                coeffs(i, a, b, cc);
                lo[i] = -th * e2 * a;
                di[i] = 1.0 / dt - th * e2 * b;
                up[i] = -th * e2 * cc;
            }
            thomas_solve<Vec3>(lo, di, up, rhs);
        }
        return rhs;
    }

    FullGrid grid_;
    FullModelConfig cfg_;
    SourceFn source_;
};

/// One full-model step on a two-sided field (interface averaged on ingest, copied on output).
inline MagnetizationField step_full(const SlabDomain& d, const MagnetizationField& state, const FullModelConfig& cfg,
                                    StepStats* stats_out = nullptr)
{
    if (state.norm_defect() > 1e-8) throw ValidationError("full model state is not on the unit sphere");
    FullModel model(FullGrid(d.merged_nodes()), cfg);
    auto u = merge_two_sided(state);
    StepStats stats;
    model.step(u, state.time, cfg.dt, stats);
    if (stats_out) *stats_out = stats;
    return split_single(d, u, state.time + cfg.dt);
}

struct ResidualReport {
    double l2_residual = 0.0;
    double max_residual = 0.0;
    double neumann_defect = 0.0;       ///< max |∂ₓu| at Γ, one-sided second-order difference
    double ghost_neumann_defect = 0.0; ///< the same with the solver's reflected-ghost difference
    double norm_defect = 0.0;
};

/// Accumulates the discrete residual of a time-indexed candidate field, using the operators of
/// the stepper: R = (c¹ − c⁰)/dt − ε²A(c̄)(θD²c¹ + (1−θ)D²c⁰) − F(c̄, εD₁c̄, ℋ(c̄)), c̄ the mean.
class ResidualAccumulator {
public:
    ResidualAccumulator(const FullModel& model) : model_(model) {}

    void add_state(double t, std::span<const Vec3> c)
    {
        const auto& g = model_.grid();
        double nd = 0.0;
        for (const auto& v : c) nd = std::max(nd, std::fabs(norm(v) - 1.0));
        rep_.norm_defect = std::max(rep_.norm_defect, nd);
        rep_.neumann_defect = std::max({rep_.neumann_defect, max_abs(g.one_sided_dx(c, 0)), max_abs(g.one_sided_dx(c, 1))});
        const auto d = g.grad(c);
        rep_.ghost_neumann_defect = std::max({rep_.ghost_neumann_defect, max_abs(d.front()), max_abs(d.back())});
        if (have_prev_) accumulate(prev_t_, prev_, t, c);
        prev_.assign(c.begin(), c.end());
        prev_t_ = t;
        have_prev_ = true;
    }

    /// Pointwise residual between two consecutive samples.
    std::vector<Vec3> pointwise(double t0, std::span<const Vec3> c0, double t1, std::span<const Vec3> c1) const
    {
        const auto& g = model_.grid();
        const auto& cfg = model_.config();
        const double e2 = cfg.epsilon * cfg.epsilon, th = cfg.theta_scheme, dt = t1 - t0;
        std::vector<Vec3> mid(c0.size());
        for (std::size_t i = 0; i < c0.size(); ++i) mid[i] = 0.5 * (c0[i] + c1[i]);
        const auto l0 = g.lap(c0), l1 = g.lap(c1);
        auto r = model_.forcing(mid, 0.5 * (t0 + t1));
        for (std::size_t i = 0; i < c0.size(); ++i) {
            const Vec3 l = th * l1[i] + (1.0 - th) * l0[i];
            r[i] = (c1[i] - c0[i]) / dt - e2 * (l + cross(mid[i], l)) - r[i];
        }
        return r;
    }

    ResidualReport report() const
    {
        ResidualReport r = rep_;
        r.l2_residual = std::sqrt(l2sq_);
        return r;
    }

private:
    void accumulate(double t0, std::span<const Vec3> c0, double t1, std::span<const Vec3> c1)
    {
        const auto r = pointwise(t0, c0, t1, c1);
        const auto& w = model_.grid().weights;
        double s = 0.0;
        for (std::size_t i = 0; i < r.size(); ++i) {
            s += w[i] * norm2(r[i]);
            rep_.max_residual = std::max(rep_.max_residual, norm(r[i]));
        }
        l2sq_ += (t1 - t0) * s;
    }

    const FullModel& model_;
    ResidualReport rep_{};
    std::vector<Vec3> prev_;
    double prev_t_ = 0.0;
    bool have_prev_ = false;
    double l2sq_ = 0.0;
};

/// Residual of a candidate sampled at the given times on the model grid.
inline ResidualReport residual(const FullModel& model, std::span<const double> times,
                               std::span<const std::vector<Vec3>> candidate)
{
    if (times.size() != candidate.size()) throw ValidationError("candidate times and states differ in length");
    ResidualAccumulator acc(model);
    for (std::size_t n = 0; n < times.size(); ++n) acc.add_state(times[n], candidate[n]);
    return acc.report();
}

struct FullTrajectory {
    std::vector<double> times;
    std::vector<std::vector<Vec3>> states;
    StepStats stats;
    ResidualReport residual;
};

/// Observer called with (t, u) at t = 0 and after every step of size cfg.dt.
using FullObserver = std::function<void(double, std::span<const Vec3>)>;

/// Marches from u_init to cfg.T. States are kept every `save_every` steps (0 keeps none); the
/// residual of the computed trajectory is accumulated over every step.
inline FullTrajectory simulate_full(const FullModel& model, std::vector<Vec3> u, int save_every = 1,
                                    const FullObserver& observer = {})
{
    const auto& cfg = model.config();
    double defect = 0.0;
    for (const auto& v : u) defect = std::max(defect, std::fabs(norm(v) - 1.0));
    if (defect > 1e-8) throw ValidationError("full model initial data is not on the unit sphere");
    if (u.size() != model.grid().size()) throw ValidationError("initial data does not match the grid");

    FullTrajectory traj;
    ResidualAccumulator acc(model);
    const int n = std::max(1, static_cast<int>(std::ceil(cfg.T / cfg.dt - 1e-9)));
    const double dt = cfg.T / n;
    auto record = [&](int s, double t) {
        acc.add_state(t, u);
        if (observer) observer(t, u);
        if (save_every > 0 && (s % save_every == 0 || s == n)) {
            traj.times.push_back(t);
            traj.states.push_back(u);
        }
    };
    record(0, 0.0);
    for (int s = 1; s <= n; ++s) {
        model.step(u, (s - 1) * dt, dt, traj.stats);
        record(s, s * dt);
    }
    traj.residual = acc.report();
    return traj;
}

inline FullTrajectory simulate_full(const SlabDomain& d, const MagnetizationField& u_init, const FullModelConfig& cfg,
                                    int save_every = 1)
{
    FullModel model(FullGrid(d.merged_nodes()), cfg);
    auto u = merge_two_sided(u_init);
    for (auto& v : u) v = normalized(v);
    return simulate_full(model, std::move(u), save_every);
}

} // namespace ferrolayer
