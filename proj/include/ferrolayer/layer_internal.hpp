#pragma once

#include "ferrolayer/block_tridiag.hpp"
#include "ferrolayer/errors.hpp"
#include "ferrolayer/geometry.hpp"
#include "ferrolayer/limit_model.hpp"
#include "ferrolayer/numerics.hpp"
#include "ferrolayer/parallel.hpp"
#include "ferrolayer/vec3.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace ferrolayer {

// ---------------------------------------------------------------------------------------------
// Extension of the limit solution across Σ
// ---------------------------------------------------------------------------------------------

/// u⁰₋ and u⁰₊ at a set of x nodes, both defined on all of Ω and both solving (LL0).
struct ExtendedPair {
    std::vector<double> x;
    std::vector<PointTrajectory> minus;
    std::vector<PointTrajectory> plus;

    const PointTrajectory& side(Side s, std::size_t i) const { return s == Side::minus ? minus[i] : plus[i]; }
};

/// Initial value of the extension of side `s` at x. On its own side this is the data itself;
/// across Σ it blends toward the data of the node's own side, which it reaches outside V_Σ.
inline Vec3 extended_initial(const InitialData& data, const LevelSets& ls, Side s, double x)
{
    const Side own = x < 0.0 ? Side::minus : (x > 0.0 ? Side::plus : s);
    if (own == s) return data.value(s, x);
    const double w = ls.sigma_blend(x);
    if (w == 1.0) return data.value(s, x);
    if (w == 0.0) return data.value(own, x);
    const Vec3 a = data.raw(own, x), b = data.raw(s, x);
    return normalized(a + w * (b - a));
}

/// Extends the limit solution to smooth u⁰± on all of Ω. Since the slab stray field is
/// pointwise, flowing the extended initial values by (LL0) gives extensions that solve (LL0)
/// everywhere and coincide with u⁰ on Ω± ∪ (Ω∓ \ V_Σ).
inline ExtendedPair extend_u0_pm(const InitialData& data, const LevelSets& ls, std::span<const double> x, double T,
                                 double dt)
{
    ls.validate();
    ExtendedPair e;
    e.x.assign(x.begin(), x.end());
    for (double xi : x) {
        e.minus.push_back(integrate_point(extended_initial(data, ls, Side::minus, xi), T, dt));
        e.plus.push_back(integrate_point(extended_initial(data, ls, Side::plus, xi), T, dt));
    }
    return e;
}

// ---------------------------------------------------------------------------------------------
// Profile storage
// ---------------------------------------------------------------------------------------------

/// Fast-variable grid: η = |y| ∈ [0, y_max] shared by both half-lines (y = −η on the minus side).
struct ProfileGridSpec {
    double y_max = 15.0;
    double h_min = 0.0025;
    double stretch = 1.02;
    double h_max = 0.25;
    double dt = 5e-3;
    double first_div = 64.0;
    double growth = 2.0;

    std::vector<double> eta() const { return stretched_nodes(y_max, h_min, stretch, h_max); }
    std::vector<double> times(double T) const { return graded_time_nodes(T, dt, first_div, growth); }
};

/// 3-vector samples over (x, t, side, η), side 0 = minus, 1 = plus.
struct ProfileField {
    std::vector<double> t;
    std::vector<double> x;
    std::vector<double> eta;
    std::vector<Vec3> data;

    ProfileField() = default;
    ProfileField(std::vector<double> t_, std::vector<double> x_, std::vector<double> eta_)
        : t(std::move(t_)), x(std::move(x_)), eta(std::move(eta_)), data(t.size() * x.size() * 2 * eta.size())
    {
    }

    std::size_t nt() const { return t.size(); }
    std::size_t nx() const { return x.size(); }
    std::size_t ny() const { return eta.size(); }
    std::size_t slice() const { return 2 * eta.size(); }
    std::size_t offset(std::size_t ix, std::size_t it, int side) const
    {
        return ((ix * t.size() + it) * 2 + static_cast<std::size_t>(side)) * eta.size();
    }
    Vec3& at(std::size_t ix, std::size_t it, int side, std::size_t j) { return data[offset(ix, it, side) + j]; }
    const Vec3& at(std::size_t ix, std::size_t it, int side, std::size_t j) const { return data[offset(ix, it, side) + j]; }

    double max_abs() const
    {
        double m = 0.0;
        for (const auto& v : data) m = std::max(m, ferrolayer::max_abs(v));
        return m;
    }
};

inline int side_index(Side s) { return s == Side::minus ? 0 : 1; }

/// Lift quantities at one (t, x): J = u⁰₊ − u⁰₋, B± = ∓½J e^{−η}, V± = u⁰± + B±.
struct LiftTerms {
    Vec3 u0[2];
    Vec3 rate[2];
    Vec3 J;
    Vec3 Jt;

    static LiftTerms at(const ExtendedPair& e, std::size_t ix, double t)
    {
        LiftTerms l;
        l.u0[0] = e.minus[ix].at(t);
        l.u0[1] = e.plus[ix].at(t);
        l.rate[0] = rhs_limit(l.u0[0], stray_1d(l.u0[0]));
        l.rate[1] = rhs_limit(l.u0[1], stray_1d(l.u0[1]));
        l.J = l.u0[1] - l.u0[0];
        l.Jt = l.rate[1] - l.rate[0];
        return l;
    }

    bool zero_jump() const { return J == Vec3{}; }
    /// B on side s at η; also ∂_yB there (the same on both sides) and ∂ₜB.
    Vec3 B(int s, double eta) const { return (s == 0 ? 0.5 : -0.5) * std::exp(-eta) * J; }
    Vec3 By(double eta) const { return 0.5 * std::exp(-eta) * J; }
    Vec3 Bt(int s, double eta) const { return (s == 0 ? 0.5 : -0.5) * std::exp(-eta) * Jt; }
    Vec3 V(int s, double eta) const { return u0[s] + B(s, eta); }
};

/// 𝒰± → W± by W± = 𝒰± ± ½J e^{∓y}.
inline Vec3 lift_W(const LiftTerms& l, int s, double eta, const Vec3& U) { return U - l.B(s, eta); }
inline Vec3 unlift_U(const LiftTerms& l, int s, double eta, const Vec3& W) { return W + l.B(s, eta); }

// ---------------------------------------------------------------------------------------------
// Profile operators
// ---------------------------------------------------------------------------------------------

/// Layer nonlinearity: F(u⁰ + U, V, H0 − (U·n)n) − F(u⁰, 0, H0) written out,
/// |V|²(u⁰+U) + U∧H0 − (U·n)(u⁰+U)∧n − U∧((u⁰+U)∧H̃) − u⁰∧(U∧H̃) + (U·n)u⁰∧(u⁰∧n),  H̃ = H0 − (U·n)n.
inline Vec3 F_pm(const Vec3& U, const Vec3& V, const Vec3& u0, const Vec3& H0, const Vec3& n)
{
    const double un = dot(U, n);
    const Vec3 w = u0 + U;
    const Vec3 Ht = H0 - un * n;
    return norm2(V) * w + cross(U, H0) - un * cross(w, n) - cross(U, cross(w, Ht)) - cross(u0, cross(U, Ht)) +
           un * cross(u0, cross(u0, n));
}

/// Right side after lifting, F̂(W, ∂_yW) = F±(W+B, ∂_yW+∂_yB) − ∂ₜB + ∂_y²B + (V+W)∧∂_y²B,
/// with ∂_y²B = B.
inline Vec3 F_hat(const LiftTerms& l, int s, double eta, const Vec3& W, const Vec3& Wy)
{
    const Vec3 B = l.B(s, eta);
    const Vec3 H0 = stray_1d(l.u0[s]);
    return F_pm(W + B, Wy + l.By(eta), l.u0[s], H0, e1) - l.Bt(s, eta) + B + cross(l.V(s, eta) + W, B);
}

/// y-derivative of side data on the η grid: central in the interior, one-sided at the ends.
/// On the minus side y = −η flips the sign.
inline std::vector<Vec3> dy_side(std::span<const double> eta, std::span<const Vec3> w, int side)
{
    const std::size_t n = eta.size();
    std::vector<Vec3> d(n);
    const double sg = side == 0 ? -1.0 : 1.0;
    d[0] = sg * d1_forward(eta[1] - eta[0], eta[2] - eta[1]).apply(w[0], w[1], w[2]);
    for (std::size_t j = 1; j + 1 < n; ++j)
        d[j] = sg * d1_central(eta[j] - eta[j - 1], eta[j + 1] - eta[j]).apply(w[j - 1], w[j], w[j + 1]);
    d[n - 1] = -sg * d1_forward(eta[n - 1] - eta[n - 2], eta[n - 2] - eta[n - 3]).apply(w[n - 1], w[n - 2], w[n - 3]);
    return d;
}

/// L(U, ∂ₜ, ∂_y²)W = ∂ₜW − ∂_y²W − U∧∂_y²W at interior η nodes of one side, with ∂ₜ the
/// difference quotient between two time levels and ∂_y² the three-point stencil on the later one.
inline std::vector<Vec3> L_apply(std::span<const double> eta, std::span<const Vec3> U, std::span<const Vec3> W0,
                                 std::span<const Vec3> W1, double dt)
{
    const std::size_t n = eta.size();
    std::vector<Vec3> r(n);
    for (std::size_t j = 1; j + 1 < n; ++j) {
        const Vec3 d2 = d2_central(eta[j] - eta[j - 1], eta[j + 1] - eta[j]).apply(W1[j - 1], W1[j], W1[j + 1]);
        r[j] = (W1[j] - W0[j]) / dt - d2 - cross(U[j], d2);
    }
    return r;
}

// ---------------------------------------------------------------------------------------------
// Linear transmission problem
// ---------------------------------------------------------------------------------------------

/// One Crank-Nicolson step of
///   ∂ₜW± − ∂_y²W± − 𝔚±∧∂_y²W± = f±  on the two half-lines,
///   W₊ = W₋, ∂_yW₊ = ∂_yW₋ at y = 0,  W = 0 at |y| = Y.
/// Inputs per side are indexed by η; coeff and forcing are the midpoint values.
struct TransmissionStep {
    std::span<const double> eta;
    double dt = 0.0;
    std::span<const Vec3> coeff[2];
    std::span<const Vec3> forcing[2];
    std::span<const Vec3> W_old[2];
};

struct TransmissionResult {
    std::vector<Vec3> W[2];
    double value_jump = 0.0;
    double derivative_jump = 0.0;
};

/// Value and y-derivative mismatch of a two-sided field at y = 0 (one-sided second-order
/// derivatives on each side).
inline void junction_mismatch(std::span<const double> eta, std::span<const Vec3> wm, std::span<const Vec3> wp,
                              double& value, double& derivative)
{
    const Stencil3 s = d1_forward(eta[1] - eta[0], eta[2] - eta[1]);
    value = max_abs(wp[0] - wm[0]);
    derivative = max_abs(s.apply(wp[0], wp[1], wp[2]) + s.apply(wm[0], wm[1], wm[2]));
}

inline TransmissionResult solve_transmission_linear(const TransmissionStep& in)
{
    const auto eta = in.eta;
    const std::size_t n = eta.size();
    if (n < 4) throw ValidationError("transmission grid needs at least four nodes per side");
    if (!(in.dt > 0.0)) throw ValidationError("transmission step needs dt > 0");

    // paired regularity of the coefficients at y = 0
    {
        double dv = 0.0, dd = 0.0;
        junction_mismatch(eta, in.coeff[0], in.coeff[1], dv, dd);
        const double scale = 1.0 + max_abs(in.coeff[0][0]) + max_abs(in.coeff[1][0]);
        // one-sided differences of smooth coefficients disagree by O(h²) even when C¹
        const double h = eta[1] - eta[0];
        if (dv > 1e-8 * scale || dd > scale * (1e-6 * (1.0 + 1.0 / h) + h * h))
            throw ValidationError("transmission coefficients are not C1 across y = 0");
    }

    const std::size_t m = n - 2; // unknowns j = 1 .. n-2 per side; W_{n-1} = 0
    BlockTridiagFactor lu[2];
    std::vector<Vec3> P[2];
    std::vector<Mat3> Q[2];
    for (int s = 0; s < 2; ++s) {
        std::vector<Mat3> L(m), D(m), U(m);
        std::vector<Vec3> rhs(m);
        Mat3 L1 = Mat3::zero();
        for (std::size_t k = 0; k < m; ++k) {
            const std::size_t j = k + 1;
            const Stencil3 st = d2_central(eta[j] - eta[j - 1], eta[j + 1] - eta[j]);
            const Mat3 A = Mat3::identity() + Mat3::cross_matrix(in.coeff[s][j]);
            L[k] = (-0.5 * st.a) * A;
            D[k] = (1.0 / in.dt) * Mat3::identity() - (0.5 * st.b) * A;
            U[k] = (-0.5 * st.c) * A;
            if (k == 0) L1 = L[k];
            const auto& wo = in.W_old[s];
            const Vec3 d2o = st.apply(wo[j - 1], wo[j], wo[j + 1]);
            rhs[k] = wo[j] / in.dt + 0.5 * (A * d2o) + in.forcing[s][j];
        }
        lu[s].factor(L, D, U);
        lu[s].solve(std::span<Vec3>(rhs));
        P[s] = std::move(rhs);
        Q[s].assign(m, Mat3::zero());
        Q[s][0] = -1.0 * L1;
        lu[s].solve(std::span<Mat3>(Q[s]));
    }

    // derivative continuity: D⁺W₊ + D⁺W₋ = 0 with the one-sided η stencil on both sides
    const Stencil3 st = d1_forward(eta[1] - eta[0], eta[2] - eta[1]);
    Mat3 M = (2.0 * st.a) * Mat3::identity();
    Vec3 r{};
    for (int s = 0; s < 2; ++s) {
        M += st.b * Q[s][0] + st.c * Q[s][1];
        r -= st.b * P[s][0] + st.c * P[s][1];
    }
    const double scale = M.max_abs();
    if (!(std::fabs(M.det()) > 1e-12 * scale * scale * scale)) throw SolverAbort("singular transmission junction block");
    const Vec3 W0 = M.inverse() * r;

    TransmissionResult out;
    for (int s = 0; s < 2; ++s) {
        out.W[s].assign(n, Vec3{});
        out.W[s][0] = W0;
        for (std::size_t k = 0; k < m; ++k) out.W[s][k + 1] = P[s][k] + Q[s][k] * W0;
    }
    junction_mismatch(eta, out.W[0], out.W[1], out.value_jump, out.derivative_jump);
    return out;
}

// ---------------------------------------------------------------------------------------------
// Picard iteration for the profiles
// ---------------------------------------------------------------------------------------------

/// Raised when successive Picard iterates stop contracting; carries the horizon that failed.
class NonContraction : public SolverAbort {
public:
    NonContraction(double T, const std::string& what) : SolverAbort(what), horizon(T) {}
    double horizon;
};

struct PicardTrace {
    std::vector<double> distances; ///< sup-in-t L²-in-y distance of successive iterates, max over x
    bool converged = false;
    int iterations = 0;
    double T = 0.0;
    double max_junction_residual = 0.0;

    std::vector<double> ratios() const
    {
        std::vector<double> r;
        for (std::size_t i = 1; i < distances.size(); ++i)
            r.push_back(distances[i - 1] > 0.0 ? distances[i] / distances[i - 1] : 0.0);
        return r;
    }
};

struct PicardOptions {
    double tol = 1e-8;
    int max_iter = 40;
    int jobs = 1;
    int stall_limit = 3; ///< consecutive ratios ≥ 1 before aborting
};

/// Converged (or partial) internal-layer profiles 𝒰± with the lifted unknowns W±.
struct ProfilePair {
    ProfileField U;
    ProfileField W;
    PicardTrace trace;
    double decay_rate = std::numeric_limits<double>::infinity();
    double v_sigma_halfwidth = 0.0;

    /// max over (t, x) of |𝒰±| at |y| = Y.
    double tail() const
    {
        double m = 0.0;
        for (std::size_t ix = 0; ix < U.nx(); ++ix)
            for (std::size_t it = 0; it < U.nt(); ++it)
                for (int s = 0; s < 2; ++s) m = std::max(m, norm(U.at(ix, it, s, U.ny() - 1)));
        return m;
    }
};

/// Profile initial data: 𝒰(0) = N(u⁰₋ + σ(y)J) − u⁰±, σ = (1 + tanh y)/2. It lies on the sphere,
/// is smooth across y = 0 and reduces to zero for J = 0.
inline Vec3 initial_W(const LiftTerms& l, int s, double eta)
{
    if (l.zero_jump()) return {};
    const double y = s == 0 ? -eta : eta;
    const Vec3 mid = l.u0[0] + 0.5 * (1.0 + std::tanh(y)) * l.J;
    const double nm = norm(mid);
    if (nm < 1e-6) throw ValidationError("antiparallel jump: the profile initial data are undefined");
    const Vec3 U = mid / nm - l.u0[s];
    return lift_W(l, s, eta, U);
}

namespace detail {

struct XSolve {
    std::vector<LiftTerms> lift;   // per time node
    std::vector<Vec3> W;           // current iterate, (it, side, j)
    std::vector<Vec3> fhat;        // F̂ of the previous iterate
    double distance = 0.0;
    double junction = 0.0;
};

inline void compute_fhat(const std::vector<double>& eta, std::size_t nt, XSolve& xs)
{
    const std::size_t ny = eta.size();
    xs.fhat.assign(nt * 2 * ny, Vec3{});
    for (std::size_t it = 0; it < nt; ++it)
        for (int s = 0; s < 2; ++s) {
            const std::size_t off = (it * 2 + static_cast<std::size_t>(s)) * ny;
            std::span<const Vec3> w(&xs.W[off], ny);
            const auto wy = dy_side(eta, w, s);
            for (std::size_t j = 0; j < ny; ++j) xs.fhat[off + j] = F_hat(xs.lift[it], s, eta[j], w[j], wy[j]);
        }
}

/// One Picard sweep for one x node: march the linear transmission problem with coefficient
/// V + W^ν and forcing F̂(W^ν).
inline void picard_sweep(const std::vector<double>& t, const std::vector<double>& eta, XSolve& xs)
{
    const std::size_t nt = t.size(), ny = eta.size();
    if (xs.lift[0].zero_jump() && std::all_of(xs.W.begin(), xs.W.end(), [](const Vec3& v) { return v == Vec3{}; })) {
        // zero jump: zero forcing and zero data give the zero iterate exactly
        xs.distance = 0.0;
        return;
    }
    compute_fhat(eta, nt, xs);
    std::vector<Vec3> next(xs.W.size());
    for (int s = 0; s < 2; ++s)
        for (std::size_t j = 0; j < ny; ++j) next[static_cast<std::size_t>(s) * ny + j] = initial_W(xs.lift[0], s, eta[j]);
    std::vector<Vec3> coeff[2], force[2];
    for (int s = 0; s < 2; ++s) {
        coeff[s].resize(ny);
        force[s].resize(ny);
    }
    double junction = 0.0;
    for (std::size_t it = 0; it + 1 < nt; ++it) {
        const double dt = t[it + 1] - t[it];
        for (int s = 0; s < 2; ++s) {
            const std::size_t o0 = (it * 2 + static_cast<std::size_t>(s)) * ny;
            const std::size_t o1 = ((it + 1) * 2 + static_cast<std::size_t>(s)) * ny;
            for (std::size_t j = 0; j < ny; ++j) {
                coeff[s][j] = 0.5 * (xs.lift[it].V(s, eta[j]) + xs.W[o0 + j] + xs.lift[it + 1].V(s, eta[j]) + xs.W[o1 + j]);
                force[s][j] = 0.5 * (xs.fhat[o0 + j] + xs.fhat[o1 + j]);
            }
        }
        TransmissionStep step;
        step.eta = eta;
        step.dt = dt;
        for (int s = 0; s < 2; ++s) {
            step.coeff[s] = coeff[s];
            step.forcing[s] = force[s];
            step.W_old[s] = std::span<const Vec3>(&next[(it * 2 + static_cast<std::size_t>(s)) * ny], ny);
        }
        auto res = solve_transmission_linear(step);
        junction = std::max(junction, res.derivative_jump);
        for (int s = 0; s < 2; ++s)
            std::copy(res.W[s].begin(), res.W[s].end(), next.begin() + static_cast<std::ptrdiff_t>(((it + 1) * 2 + static_cast<std::size_t>(s)) * ny));
    }
    // sup over t of the L² distance in y
    const auto w = trapezoid_weights(eta);
    double dist = 0.0;
    for (std::size_t it = 0; it < nt; ++it) {
        double acc = 0.0;
        for (int s = 0; s < 2; ++s) {
            const std::size_t off = (it * 2 + static_cast<std::size_t>(s)) * ny;
            for (std::size_t j = 0; j < ny; ++j) acc += w[j] * norm2(next[off + j] - xs.W[off + j]);
        }
        dist = std::max(dist, std::sqrt(acc));
    }
    xs.W = std::move(next);
    xs.distance = dist;
    xs.junction = junction;
}

} // namespace detail

/// Fits δ in |𝒰| ~ e^{−δ|y|} over |y| ∈ [y_lo, y_hi] at the final time, worst case over x and side.
inline double fit_decay_rate(const ProfileField& U, double y_lo = 2.0, double y_hi = 8.0)
{
    double rate = std::numeric_limits<double>::infinity();
    const std::size_t it = U.nt() - 1;
    for (std::size_t ix = 0; ix < U.nx(); ++ix)
        for (int s = 0; s < 2; ++s) {
            std::vector<double> ys, ls;
            for (std::size_t j = 0; j < U.ny(); ++j) {
                const double e = U.eta[j];
                const double a = norm(U.at(ix, it, s, j));
                if (e >= y_lo && e <= y_hi && a > 1e-300) {
                    ys.push_back(e);
                    ls.push_back(std::log(a));
                }
            }
            if (ys.size() >= 3) rate = std::min(rate, -linear_slope(ys, ls));
        }
    return rate;
}

/// Picard iteration of Step 4 for the profiles on x nodes inside V_Σ. Iterates start from
/// W⁰ = 0 and are run in lockstep over x; the trace records the max distance over x.
inline ProfilePair picard_profiles(const ExtendedPair& u0pm, const ProfileGridSpec& grid, double T,
                                   const PicardOptions& opt)
{
    if (!(opt.tol > 0.0)) throw ValidationError("Picard tolerance must be positive");
    if (opt.max_iter < 1) throw ValidationError("max_iter must be at least 1");
    const auto t = grid.times(T);
    const auto eta = grid.eta();
    const std::size_t nt = t.size(), ny = eta.size(), nx = u0pm.x.size();

    std::vector<detail::XSolve> xs(nx);
    parallel_for(nx, opt.jobs, [&](std::size_t ix) {
        auto& s = xs[ix];
        s.lift.reserve(nt);
        for (double tk : t) s.lift.push_back(LiftTerms::at(u0pm, ix, tk));
        s.W.assign(nt * 2 * ny, Vec3{});
    });

    ProfilePair out;
    out.trace.T = T;
    int stall = 0;
    for (int iter = 1; iter <= opt.max_iter; ++iter) {
        parallel_for(nx, opt.jobs, [&](std::size_t ix) { detail::picard_sweep(t, eta, xs[ix]); });
        double d = 0.0, jr = 0.0;
        for (const auto& s : xs) {
            d = std::max(d, s.distance);
            jr = std::max(jr, s.junction);
        }
        out.trace.distances.push_back(d);
        out.trace.iterations = iter;
        out.trace.max_junction_residual = std::max(out.trace.max_junction_residual, jr);
        if (d < opt.tol) {
            out.trace.converged = true;
            break;
        }
        const auto& ds = out.trace.distances;
        if (ds.size() >= 2 && ds[ds.size() - 1] >= ds[ds.size() - 2])
            ++stall;
        else
            stall = 0;
        if (stall >= opt.stall_limit || !std::isfinite(d))
            throw NonContraction(T, "Picard iteration does not contract on [0, " + std::to_string(T) + "]");
    }

    out.W = ProfileField(t, u0pm.x, eta);
    out.U = ProfileField(t, u0pm.x, eta);
    for (std::size_t ix = 0; ix < nx; ++ix)
        for (std::size_t it = 0; it < nt; ++it)
            for (int s = 0; s < 2; ++s)
                for (std::size_t j = 0; j < ny; ++j) {
                    const Vec3 w = xs[ix].W[(it * 2 + static_cast<std::size_t>(s)) * ny + j];
                    out.W.at(ix, it, s, j) = w;
                    out.U.at(ix, it, s, j) = unlift_U(xs[ix].lift[it], s, eta[j], w);
                }
    out.decay_rate = fit_decay_rate(out.U);
    return out;
}

/// Value and derivative transmission residuals of 𝒰 at y = 0 against the required jump
/// −u⁰₊ + u⁰₋; the derivative uses third-order one-sided differences of 𝒰 itself.
struct TransmissionReport {
    double value = 0.0;
    double derivative = 0.0;
};

inline TransmissionReport transmission_residuals(const ProfilePair& p, const ExtendedPair& u0pm)
{
    TransmissionReport r;
    const auto& U = p.U;
    const auto& e = U.eta;
    // four-point one-sided derivative weights at η = 0
    auto weights = [&](double (&w)[4]) {
        const double x[4] = {e[0], e[1], e[2], e[3]};
        for (int i = 0; i < 4; ++i) {
            double num = 0.0;
            for (int k = 0; k < 4; ++k) {
                if (k == i) continue;
                double prod = 1.0;
                for (int l = 0; l < 4; ++l)
                    if (l != i && l != k) prod *= (x[0] - x[l]);
                num += prod;
            }
            double den = 1.0;
            for (int l = 0; l < 4; ++l)
                if (l != i) den *= (x[i] - x[l]);
            w[i] = num / den;
        }
    };
    double w[4];
    weights(w);
    for (std::size_t ix = 0; ix < U.nx(); ++ix)
        for (std::size_t it = 0; it < U.nt(); ++it) {
            const auto l = LiftTerms::at(u0pm, ix, U.t[it]);
            const Vec3 jump = U.at(ix, it, 1, 0) - U.at(ix, it, 0, 0);
            r.value = std::max(r.value, max_abs(jump + l.J));
            Vec3 dp{}, dm{};
            for (int k = 0; k < 4; ++k) {
                dp += w[k] * U.at(ix, it, 1, static_cast<std::size_t>(k));
                dm += w[k] * U.at(ix, it, 0, static_cast<std::size_t>(k));
            }
            r.derivative = std::max(r.derivative, max_abs(dp + dm)); // ∂_y𝒰₋ = −∂_η𝒰₋
        }
    return r;
}

// ---------------------------------------------------------------------------------------------
// Weighted norms
// ---------------------------------------------------------------------------------------------

namespace detail {

/// Derivative along one axis of a ProfileField (0 = t, 1 = x, 2 = y). Nodes with fewer than
/// three points along the axis give a zero derivative.
inline ProfileField axis_derivative(const ProfileField& f, int axis)
{
    ProfileField d = f;
    const std::size_t nt = f.nt(), nx = f.nx(), ny = f.ny();
    auto diff = [](std::span<const double> x, auto get, auto put) {
        const std::size_t n = x.size();
        if (n < 3) {
            for (std::size_t i = 0; i < n; ++i) put(i, Vec3{});
            return;
        }
        put(0, d1_forward(x[1] - x[0], x[2] - x[1]).apply(get(0), get(1), get(2)));
        for (std::size_t i = 1; i + 1 < n; ++i)
            put(i, d1_central(x[i] - x[i - 1], x[i + 1] - x[i]).apply(get(i - 1), get(i), get(i + 1)));
        put(n - 1, -1.0 * d1_forward(x[n - 1] - x[n - 2], x[n - 2] - x[n - 3]).apply(get(n - 1), get(n - 2), get(n - 3)));
    };
    for (int s = 0; s < 2; ++s) {
        if (axis == 0) {
            for (std::size_t ix = 0; ix < nx; ++ix)
                for (std::size_t j = 0; j < ny; ++j)
                    diff(f.t, [&](std::size_t i) { return f.at(ix, i, s, j); },
                         [&](std::size_t i, Vec3 v) { d.at(ix, i, s, j) = v; });
        } else if (axis == 1) {
            for (std::size_t it = 0; it < nt; ++it)
                for (std::size_t j = 0; j < ny; ++j)
                    diff(f.x, [&](std::size_t i) { return f.at(i, it, s, j); },
                         [&](std::size_t i, Vec3 v) { d.at(i, it, s, j) = v; });
        } else {
            const double sg = s == 0 ? -1.0 : 1.0;
            for (std::size_t ix = 0; ix < nx; ++ix)
                for (std::size_t it = 0; it < nt; ++it)
                    diff(f.eta, [&](std::size_t i) { return f.at(ix, it, s, i); },
                         [&](std::size_t i, Vec3 v) { d.at(ix, it, s, i) = sg * v; });
        }
    }
    return d;
}

} // namespace detail

/// Discrete |yᵏW|_{m,λ,T}: e^{−λt}-weighted L²([0,T] × x-range × ℝ) norm of all (t, x, y)
/// derivatives of order ≤ m of yᵏW, summed over both half-lines. A single x node is treated as
/// a unit-measure parameter.
inline double weighted_profile_norm(const ProfileField& W, int m, double lambda, int k)
{
    if (m < 0 || m > 2) throw ValidationError("weighted norm supports 0 <= m <= 2");
    if (!(lambda >= 1.0)) throw ValidationError("weighted norm needs lambda >= 1");
    if (k < 0) throw ValidationError("weighted norm needs k >= 0");
    ProfileField base = W;
    for (std::size_t ix = 0; ix < W.nx(); ++ix)
        for (std::size_t it = 0; it < W.nt(); ++it)
            for (int s = 0; s < 2; ++s)
                for (std::size_t j = 0; j < W.ny(); ++j) base.at(ix, it, s, j) = std::pow(W.eta[j], k) * W.at(ix, it, s, j);

    const auto wt = trapezoid_weights(W.t);
    const auto wy = trapezoid_weights(W.eta);
    const auto wx = W.nx() > 1 ? trapezoid_weights(W.x) : std::vector<double>(1, 1.0);
    auto integrate = [&](const ProfileField& f) {
        double acc = 0.0;
        for (std::size_t ix = 0; ix < f.nx(); ++ix)
            for (std::size_t it = 0; it < f.nt(); ++it) {
                const double g = std::exp(-2.0 * lambda * f.t[it]) * wt[it] * wx[ix];
                for (int s = 0; s < 2; ++s)
                    for (std::size_t j = 0; j < f.ny(); ++j) acc += g * wy[j] * norm2(f.at(ix, it, s, j));
            }
        return acc;
    };

    double total = integrate(base);
    if (m >= 1) {
        ProfileField d[3];
        for (int a = 0; a < 3; ++a) {
            d[a] = detail::axis_derivative(base, a);
            total += integrate(d[a]);
        }
        if (m >= 2)
            for (int a = 0; a < 3; ++a)
                for (int b = a; b < 3; ++b) total += integrate(detail::axis_derivative(d[a], b));
    }
    return std::sqrt(total);
}

} // namespace ferrolayer
