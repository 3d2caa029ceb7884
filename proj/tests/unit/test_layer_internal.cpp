#include "ferrolayer/full_model.hpp"
#include "ferrolayer/layer_internal.hpp"
#include "support/manufactured.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ferrolayer;

namespace {

const InitialData jump = InitialData::constant({0.6, 0.8, 0.0}, {-0.6, 0.8, 0.0});

// Jump data with x-dependence on both sides.
InitialData sloped_jump()
{
    return {[](double x) { return Vec3{0.6 + 0.3 * x, 0.8, 0.2 * x}; },
            [](double x) { return Vec3{-0.6 + 0.3 * x, 0.8, 0.2 * x}; }};
}

Vec3 rand_vec(std::mt19937_64& rng, double s = 1.0)
{
    std::uniform_real_distribution<double> U(-s, s);
    return {U(rng), U(rng), U(rng)};
}

ProfileGridSpec coarse_grid()
{
    ProfileGridSpec g;
    g.dt = 1e-2;
    g.stretch = 1.05;
    return g;
}

} // namespace

TEST(Lifting, RoundTripAndHomogeneousTransmission)
{
    const std::vector<double> x{0.0};
    const auto e = extend_u0_pm(jump, LevelSets{}, x, 0.5, 1e-3);
    std::mt19937_64 rng(5);
    for (double t : {0.0, 0.13, 0.5}) {
        const auto l = LiftTerms::at(e, 0, t);
        for (int s = 0; s < 2; ++s)
            for (double eta : {0.0, 0.7, 3.0}) {
                const Vec3 U = rand_vec(rng);
                EXPECT_LE(max_abs(unlift_U(l, s, eta, lift_W(l, s, eta, U)) - U), 1e-14);
                // W± = 𝒰± ± ½J e^{∓y}
                const double y = s == 0 ? -eta : eta;
                const Vec3 expect = U + (s == 1 ? 0.5 : -0.5) * std::exp(s == 1 ? -y : y) * l.J;
                EXPECT_LE(max_abs(lift_W(l, s, eta, U) - expect), 1e-15);
            }
        // 𝒰₊ − 𝒰₋ = −J at y = 0 exactly when W₊ = W₋
        const Vec3 W = rand_vec(rng);
        EXPECT_LE(max_abs(unlift_U(l, 1, 0.0, W) - unlift_U(l, 0, 0.0, W) + l.J), 1e-15);
    }
}

TEST(FPm, VanishingCases)
{
    std::mt19937_64 rng(9);
    for (int i = 0; i < 100; ++i) {
        const Vec3 u0 = normalized(rand_vec(rng)), H0 = rand_vec(rng);
        EXPECT_EQ(F_pm({}, {}, u0, H0, e1), (Vec3{0, 0, 0}));
        const Vec3 U{0.0, 0.4, -0.3}; // U ⟂ n
        EXPECT_LE(max_abs(F_pm(U, {}, u0, {}, e1)), 1e-15);
    }
}

TEST(FPm, MatchesLayerPartOfFullNonlinearity)
{
    // brute force: F(u⁰ + U, V, H0 − (U·n)n) − F(u⁰, 0, H0), with F the full-model nonlinearity
    std::mt19937_64 rng(21);
    for (int i = 0; i < 100; ++i) {
        const Vec3 u0 = normalized(rand_vec(rng)), U = rand_vec(rng), V = rand_vec(rng), H0 = rand_vec(rng);
        const Vec3 n = normalized(rand_vec(rng));
        const Vec3 ref = F_rhs(u0 + U, V, H0 + layer_strayfield_correction(U, n)) - F_rhs(u0, {}, H0);
        EXPECT_LE(max_abs(F_pm(U, V, u0, H0, n) - ref), 1e-12);
    }
}

TEST(FHat, DirectSubstitution)
{
    // L(u⁰+𝒰)𝒰 − F±(𝒰, 𝒰_y) must equal L(V+W)W − F̂(W, W_y) pointwise for 𝒰 = W + B
    const std::vector<double> x{0.0};
    const auto e = extend_u0_pm(jump, LevelSets{}, x, 0.5, 1e-3);
    std::mt19937_64 rng(33);
    for (int i = 0; i < 100; ++i) {
        const double t = 0.5 * (i % 10) / 10.0;
        const auto l = LiftTerms::at(e, 0, t);
        const int s = i % 2;
        const double eta = 0.1 * (i % 37);
        const Vec3 u0 = l.u0[s];
        const Vec3 J = e.plus[0].at(t) - e.minus[0].at(t);
        const Vec3 Jt = rhs_limit(e.plus[0].at(t), stray_1d(e.plus[0].at(t))) -
                        rhs_limit(e.minus[0].at(t), stray_1d(e.minus[0].at(t)));
        const double sg = s == 0 ? 0.5 : -0.5;
        const Vec3 B = sg * std::exp(-eta) * J, Bt = sg * std::exp(-eta) * Jt, By = 0.5 * std::exp(-eta) * J;
        const Vec3 W = rand_vec(rng), Wy = rand_vec(rng), Wyy = rand_vec(rng), Wt = rand_vec(rng);
        const Vec3 U = W + B, Uy = Wy + By, Uyy = Wyy + B, Ut = Wt + Bt;
        const Vec3 orig = Ut - Uyy - cross(u0 + U, Uyy) - F_pm(U, Uy, u0, stray_1d(u0), e1);
        const Vec3 V = u0 + B;
        const Vec3 lifted = Wt - Wyy - cross(V + W, Wyy) - F_hat(l, s, eta, W, Wy);
        EXPECT_LE(max_abs(orig - lifted), 1e-12);
    }
}

TEST(LApply, AnalyticOracles)
{
    for (int pass = 0; pass < 2; ++pass) {
        // W = const → 0
        std::vector<double> eta;
        for (int j = 0; j <= 40; ++j) eta.push_back(0.1 * j);
        std::vector<Vec3> c(eta.size(), Vec3{0.3, -0.2, 0.9}), z(eta.size());
        const auto r0 = L_apply(eta, z, c, c, 0.1);
        for (std::size_t j = 1; j + 1 < eta.size(); ++j) EXPECT_LE(max_abs(r0[j]), 1e-13);
    }
    // U = 0, W = e^{−y}a static: L W = −e^{−y}a to O(h²)
    const Vec3 a{0.2, -1.0, 0.5};
    double err[2];
    for (int r = 0; r < 2; ++r) {
        const double h = r == 0 ? 0.1 : 0.05;
        std::vector<double> eta;
        for (int j = 0; j * h <= 4.0 + 1e-12; ++j) eta.push_back(j * h);
        std::vector<Vec3> W(eta.size()), U0(eta.size()), U1(eta.size(), e1);
        for (std::size_t j = 0; j < eta.size(); ++j) W[j] = std::exp(-eta[j]) * a;
        const auto L0 = L_apply(eta, U0, W, W, 1.0);
        err[r] = 0.0;
        for (std::size_t j = 1; j + 1 < eta.size(); ++j) err[r] = std::max(err[r], max_abs(L0[j] + std::exp(-eta[j]) * a));
        // U = e₁, W = e^{−y}e₂: −e^{−y}(e₂ + e₃)
        std::vector<Vec3> W2(eta.size());
        for (std::size_t j = 0; j < eta.size(); ++j) W2[j] = std::exp(-eta[j]) * e2;
        const auto L1 = L_apply(eta, U1, W2, W2, 1.0);
        for (std::size_t j = 1; j + 1 < eta.size(); ++j)
            EXPECT_LE(max_abs(L1[j] + std::exp(-eta[j]) * Vec3{0, 1, 1}), 2e-3);
    }
    EXPECT_NEAR(err[0] / err[1], 4.0, 0.2);
}

TEST(Transmission, ZeroDataStaysZero)
{
    std::vector<double> eta;
    for (int j = 0; j <= 30; ++j) eta.push_back(0.2 * j);
    std::vector<Vec3> z(eta.size()), c(eta.size(), Vec3{0.6, 0.8, 0.0});
    TransmissionStep st;
    st.eta = eta;
    st.dt = 0.01;
    for (int s = 0; s < 2; ++s) {
        st.coeff[s] = c;
        st.forcing[s] = z;
        st.W_old[s] = z;
    }
    const auto r = solve_transmission_linear(st);
    for (int s = 0; s < 2; ++s)
        for (const auto& v : r.W[s]) EXPECT_EQ(v, (Vec3{0, 0, 0}));
}

TEST(Transmission, ManufacturedOrders)
{
    std::vector<double> hs{0.2, 0.1, 0.05}, eh;
    for (double h : hs) {
        const auto r = mms::transmission_error(h, 1e-3, 0.2);
        EXPECT_LE(r.junction_jump, 1e-10);
        eh.push_back(r.error);
    }
    EXPECT_GE(loglog_slope(hs, eh), 1.8);
    std::vector<double> dts{0.04, 0.02, 0.01}, et;
    for (double dt : dts) et.push_back(mms::transmission_error(0.0125, dt, 0.4).error);
    EXPECT_GE(loglog_slope(dts, et), 1.8);
}

TEST(Transmission, RejectsDiscontinuousCoefficient)
{
    std::vector<double> eta;
    for (int j = 0; j <= 30; ++j) eta.push_back(0.2 * j);
    std::vector<Vec3> z(eta.size()), cm(eta.size(), Vec3{0.6, 0.8, 0.0}), cp(eta.size(), Vec3{-0.6, 0.8, 0.0});
    TransmissionStep st;
    st.eta = eta;
    st.dt = 0.01;
    st.coeff[0] = cm;
    st.coeff[1] = cp;
    for (int s = 0; s < 2; ++s) {
        st.forcing[s] = z;
        st.W_old[s] = z;
    }
    EXPECT_THROW(solve_transmission_linear(st), ValidationError);
}

TEST(Extension, ContinuousAndConstantData)
{
    const LevelSets ls;
    const InitialData cont{[](double x) { return Vec3{0.6 + 0.3 * x, 0.8, 0.2 * x}; },
                           [](double x) { return Vec3{0.6 + 0.3 * x, 0.8, 0.2 * x}; }};
    for (double x = -1.0; x <= 1.0; x += 0.05)
        EXPECT_EQ(extended_initial(cont, ls, Side::minus, x), extended_initial(cont, ls, Side::plus, x));
    // constants: c₊ on Ω₊, c₊ blended toward c₋ inside V_Σ ∩ Ω₋, c₋ beyond
    const Vec3 cm = normalized(Vec3{0.6, 0.8, 0.0}), cp = normalized(Vec3{-0.6, 0.8, 0.0});
    EXPECT_EQ(extended_initial(jump, ls, Side::plus, 0.3), cp);
    EXPECT_EQ(extended_initial(jump, ls, Side::plus, -0.05), cp);
    EXPECT_EQ(extended_initial(jump, ls, Side::plus, -0.5), cm);
    const Vec3 mid = extended_initial(jump, ls, Side::plus, -0.26);
    EXPECT_GT(norm(mid - cp), 1e-3);
    EXPECT_GT(norm(mid - cm), 1e-3);
    EXPECT_NEAR(norm(mid), 1.0, 1e-15);
}

TEST(Extension, IsSmoothAcrossSigma)
{
    // C²: second differences converge and their increments shrink with h
    const LevelSets ls;
    const auto d = sloped_jump();
    auto sweep = [&](double h, double& peak, double& step) {
        peak = step = 0.0;
        for (int s = 0; s < 2; ++s) {
            const Side side = s == 0 ? Side::minus : Side::plus;
            auto d2 = [&](double x) {
                return (extended_initial(d, ls, side, x + h) - 2.0 * extended_initial(d, ls, side, x) +
                        extended_initial(d, ls, side, x - h)) /
                       (h * h);
            };
            Vec3 prev = d2(-0.6);
            for (double x = -0.6 + h; x <= 0.6; x += h) {
                const Vec3 cur = d2(x);
                peak = std::max(peak, max_abs(cur));
                step = std::max(step, max_abs(cur - prev));
                prev = cur;
            }
        }
    };
    double p1, s1, p2, s2;
    sweep(2e-3, p1, s1);
    sweep(1e-3, p2, s2);
    EXPECT_NEAR(p2 / p1, 1.0, 0.05);
    EXPECT_LT(s2, 0.6 * s1);
}

TEST(Extension, ProfilesInsensitiveToAdmissibleExtension)
{
    // compare with the even-reflection extension u⁰±(x) := data±(−x) across Σ
    const auto d = sloped_jump();
    const LevelSets ls;
    const std::vector<double> x{-0.02, 0.0, 0.02};
    const double T = 0.2;
    const auto a = extend_u0_pm(d, ls, x, T, 1e-3);
    ExtendedPair b;
    b.x = x;
    for (double xi : x) {
        b.minus.push_back(integrate_point(d.value(Side::minus, xi > 0 ? -xi : xi), T, 1e-3));
        b.plus.push_back(integrate_point(d.value(Side::plus, xi < 0 ? -xi : xi), T, 1e-3));
    }
    const auto pa = picard_profiles(a, coarse_grid(), T, {});
    const auto pb = picard_profiles(b, coarse_grid(), T, {});
    for (std::size_t ix = 0; ix < x.size(); ++ix) {
        double diff = 0.0;
        for (std::size_t k = 0; k < pa.U.data.size() / x.size(); ++k)
            diff = std::max(diff, max_abs(pa.U.data[ix * pa.U.data.size() / x.size() + k] -
                                          pb.U.data[ix * pb.U.data.size() / x.size() + k]));
        // data slopes are at most 0.3, so the extensions differ by ≤ 2·0.3|x| before normalization
        EXPECT_LE(diff, x[ix] == 0.0 ? 1e-12 : 4.0 * 0.3 * std::fabs(x[ix])) << "x = " << x[ix];
    }
}

TEST(Picard, ZeroJumpGivesZeroProfiles)
{
    const InitialData cont{[](double x) { return Vec3{0.6 + 0.3 * x, 0.8, 0.2 * x}; },
                           [](double x) { return Vec3{0.6 + 0.3 * x, 0.8, 0.2 * x}; }};
    const std::vector<double> x{-0.2, 0.0, 0.2};
    const auto p = picard_profiles(extend_u0_pm(cont, LevelSets{}, x, 0.5, 1e-3), coarse_grid(), 0.5, {});
    EXPECT_TRUE(p.trace.converged);
    EXPECT_EQ(p.trace.iterations, 1);
    EXPECT_LE(p.U.max_abs(), 1e-12);
}

TEST(Picard, JumpFixtureConvergesAndDecays)
{
    const std::vector<double> x{-0.1, 0.0, 0.1};
    const auto e = extend_u0_pm(jump, LevelSets{}, x, 0.5, 1e-3);
    const auto p = picard_profiles(e, ProfileGridSpec{}, 0.5, {});
    EXPECT_TRUE(p.trace.converged);
    EXPECT_LE(p.trace.iterations, 10);
    for (double r : p.trace.ratios()) EXPECT_LT(r, 1.0);
    const auto rep = transmission_residuals(p, e);
    EXPECT_LE(rep.value, 1e-8);
    EXPECT_LE(rep.derivative, 1e-6);
    EXPECT_LE(p.tail(), 1e-6);
    EXPECT_GT(p.decay_rate, 0.5);
    // 𝒰 reaches the full jump at y = 0 and is bounded by it
    EXPECT_GT(p.U.max_abs(), 0.5);
    EXPECT_LE(p.U.max_abs(), 1.2 + 1e-12);
}

TEST(Picard, TruncationInsensitivity)
{
    const std::vector<double> x{0.0};
    const auto e = extend_u0_pm(jump, LevelSets{}, x, 0.5, 1e-3);
    ProfileGridSpec full, half;
    half.y_max = 7.5;
    const auto a = picard_profiles(e, full, 0.5, {});
    const auto b = picard_profiles(e, half, 0.5, {});
    ASSERT_EQ(a.U.t.size(), b.U.t.size());
    double worst = 0.0;
    for (std::size_t it = 0; it < a.U.nt(); ++it)
        for (int s = 0; s < 2; ++s)
            for (std::size_t j = 0; j < b.U.ny() && b.U.eta[j] <= 3.0; ++j) {
                ASSERT_EQ(a.U.eta[j], b.U.eta[j]);
                worst = std::max(worst, max_abs(a.U.at(0, it, s, j) - b.U.at(0, it, s, j)));
            }
    EXPECT_LT(worst, 1e-4);
}

TEST(Picard, PartialTraceWhenMaxIterIsOne)
{
    const std::vector<double> x{0.0};
    PicardOptions opt;
    opt.max_iter = 1;
    const auto p = picard_profiles(extend_u0_pm(jump, LevelSets{}, x, 0.2, 1e-3), coarse_grid(), 0.2, opt);
    EXPECT_FALSE(p.trace.converged);
    EXPECT_EQ(p.trace.distances.size(), 1u);
}

TEST(Picard, AntiparallelJumpIsRejected)
{
    const auto anti = InitialData::constant({0.0, 1.0, 0.0}, {0.0, -1.0, 0.0});
    const std::vector<double> x{0.0};
    EXPECT_THROW(picard_profiles(extend_u0_pm(anti, LevelSets{}, x, 0.1, 1e-3), coarse_grid(), 0.1, {}), ValidationError);
}

TEST(Picard, ParallelAndSerialAgree)
{
    const std::vector<double> x{-0.1, -0.05, 0.0, 0.05, 0.1};
    const auto e = extend_u0_pm(sloped_jump(), LevelSets{}, x, 0.2, 1e-3);
    PicardOptions o1, o4;
    o4.jobs = 4;
    const auto a = picard_profiles(e, coarse_grid(), 0.2, o1);
    const auto b = picard_profiles(e, coarse_grid(), 0.2, o4);
    ASSERT_EQ(a.U.data.size(), b.U.data.size());
    for (std::size_t i = 0; i < a.U.data.size(); ++i) ASSERT_EQ(a.U.data[i], b.U.data[i]);
}

TEST(WeightedNorm, ZeroAndClosedForm)
{
    ProfileGridSpec g;
    g.h_min = 0.005;
    g.h_max = 0.01;
    const double T = 0.5, lambda = 2.0;
    std::vector<double> t;
    for (int k = 0; k <= 500; ++k) t.push_back(T * k / 500);
    const std::vector<double> x{-0.35, 0.0, 0.35};
    ProfileField W(t, x, g.eta());
    EXPECT_EQ(weighted_profile_norm(W, 2, lambda, 1), 0.0);
    const Vec3 a{0.3, -0.4, 1.2};
    for (std::size_t ix = 0; ix < x.size(); ++ix)
        for (std::size_t it = 0; it < t.size(); ++it)
            for (std::size_t j = 0; j < W.ny(); ++j) W.at(ix, it, 1, j) = std::exp(-W.eta[j]) * a;
    const double Y = W.eta.back();
    const double expect = norm(a) * std::sqrt((1 - std::exp(-2 * lambda * T)) / (2 * lambda)) *
                          std::sqrt((1 - std::exp(-2 * Y)) / 2 * 0.7);
    EXPECT_NEAR(weighted_profile_norm(W, 0, lambda, 0) / expect, 1.0, 1e-4);
    double prev = 1e300;
    for (double l : {1.0, 2.0, 8.0, 32.0}) {
        const double v = weighted_profile_norm(W, 1, l, 1);
        EXPECT_LE(v, prev);
        prev = v;
    }
}

TEST(WeightedNorm, LinearSolveRatioDecreasesWithLambda)
{
    ProfileGridSpec g;
    g.y_max = 8.0;
    g.stretch = 1.05;
    const auto eta = g.eta();
    const auto t = g.times(1.0);
    const std::vector<double> x{0.0};
    ProfileField W(t, x, eta), F(t, x, eta);
    std::vector<Vec3> c(eta.size(), Vec3{0.6, 0.8, 0.0}), f[2], w[2];
    for (int s = 0; s < 2; ++s) {
        f[s].resize(eta.size());
        w[s].assign(eta.size(), Vec3{});
        for (std::size_t j = 0; j < eta.size(); ++j) f[s][j] = std::exp(-eta[j] * eta[j]) * Vec3{1.0, 0.5, 0.0};
    }
    for (std::size_t it = 0; it < t.size(); ++it)
        for (int s = 0; s < 2; ++s)
            for (std::size_t j = 0; j < eta.size(); ++j) F.at(0, it, s, j) = f[s][j];
    for (std::size_t it = 0; it + 1 < t.size(); ++it) {
        TransmissionStep st;
        st.eta = eta;
        st.dt = t[it + 1] - t[it];
        for (int s = 0; s < 2; ++s) {
            st.coeff[s] = c;
            st.forcing[s] = f[s];
            st.W_old[s] = w[s];
        }
        auto r = solve_transmission_linear(st);
        for (int s = 0; s < 2; ++s) {
            w[s] = r.W[s];
            for (std::size_t j = 0; j < eta.size(); ++j) W.at(0, it + 1, s, j) = w[s][j];
        }
    }
    double prev = 1e300;
    for (double l : {1.0, 4.0, 16.0, 64.0}) {
        const double ratio = weighted_profile_norm(W, 0, l, 0) / weighted_profile_norm(F, 0, l, 0);
        EXPECT_LT(ratio, prev);
        prev = ratio;
    }
}
