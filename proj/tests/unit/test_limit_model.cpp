#include "ferrolayer/limit_model.hpp"
#include "ferrolayer/numerics.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <random>

using namespace ferrolayer;

namespace {

double closed_form_u1(double v0, double t)
{
    const double e = std::exp(-2.0 * t);
    return std::sqrt(v0 * e / (1.0 - v0 + v0 * e));
}

// Dormand-Prince 5(4) with step control on a generic 3-vector ODE.
template <class F>
Vec3 dopri(F f, Vec3 y, double T, double tol)
{
    static const double c[7] = {0, 1. / 5, 3. / 10, 4. / 5, 8. / 9, 1, 1};
    static const double a[7][6] = {{},
                                   {1. / 5},
                                   {3. / 40, 9. / 40},
                                   {44. / 45, -56. / 15, 32. / 9},
                                   {19372. / 6561, -25360. / 2187, 64448. / 6561, -212. / 729},
                                   {9017. / 3168, -355. / 33, 46732. / 5247, 49. / 176, -5103. / 18656},
                                   {35. / 384, 0, 500. / 1113, 125. / 192, -2187. / 6784, 11. / 84}};
    static const double b5[7] = {35. / 384, 0, 500. / 1113, 125. / 192, -2187. / 6784, 11. / 84, 0};
    static const double b4[7] = {5179. / 57600, 0, 7571. / 16695, 393. / 640, -92097. / 339200, 187. / 2100, 1. / 40};
    (void)c;
    double t = 0.0, h = 1e-3;
    while (t < T) {
        if (t + h > T) h = T - t;
        Vec3 k[7];
        for (int s = 0; s < 7; ++s) {
            Vec3 ys = y;
            for (int j = 0; j < s; ++j) ys += (h * a[s][j]) * k[j];
            k[s] = f(ys);
        }
        Vec3 y5 = y, y4 = y;
        for (int s = 0; s < 7; ++s) {
            y5 += (h * b5[s]) * k[s];
            y4 += (h * b4[s]) * k[s];
        }
        const double err = max_abs(y5 - y4);
        if (err <= tol) {
            t += h;
            y = y5;
        }
        h *= std::clamp(0.9 * std::pow(tol / std::max(err, 1e-300), 0.2), 0.2, 5.0);
    }
    return y;
}

} // namespace

TEST(RhsLimit, Examples)
{
    EXPECT_EQ(rhs_limit({0, 1, 0}, {0, 0, 0}), (Vec3{0, 0, 0}));
    EXPECT_EQ(rhs_limit({0, 1, 0}, {1, 0, 0}), (Vec3{1, 0, -1}));
    EXPECT_EQ(rhs_limit(e1, -1.0 * e1), (Vec3{0, 0, 0}));
}

TEST(RhsLimit, TangentToSphere)
{
    std::mt19937_64 rng(11);
    std::normal_distribution<double> N;
    double worst = 0.0;
    for (int s = 0; s < 10000; ++s) {
        const Vec3 u = normalized(Vec3{N(rng), N(rng), N(rng)});
        const Vec3 H{N(rng), N(rng), N(rng)};
        worst = std::max(worst, std::fabs(dot(rhs_limit(u, H), u)));
    }
    EXPECT_LE(worst, 1e-14);
}

TEST(ClosedForm, AgreesWithAdaptiveIntegration)
{
    // scalar reduction du1/dt = u1(u1² − 1) and the full 3-vector ODE, both by an adaptive RK
    auto full = [](const Vec3& u) { return rhs_limit(u, stray_1d(u)); };
    const Vec3 y = dopri(full, {0.6, 0.8, 0.0}, 1.0, 1e-13);
    auto scalar = [](const Vec3& u) { return Vec3{u.x * (u.x * u.x - 1.0), 0, 0}; };
    const Vec3 s = dopri(scalar, {0.6, 0, 0}, 1.0, 1e-13);
    EXPECT_NEAR(y.x, closed_form_u1(0.36, 1.0), 1e-10);
    EXPECT_NEAR(s.x, closed_form_u1(0.36, 1.0), 1e-10);
    EXPECT_NEAR(closed_form_u1(0.36, 1.0), 0.2659716, 1e-7);
}

TEST(IntegrateLimit, ReproducesClosedFormAndJump)
{
    SlabConfig c;
    c.cells_per_side = 8;
    const SlabDomain d(c);
    const auto init = InitialData::constant({0.6, 0.8, 0.0}, {-0.6, 0.8, 0.0}).sample(d);
    const auto tr = integrate_limit(init, 1.0, 1e-3);
    const auto& f = tr.states.back();
    EXPECT_NEAR(tr.times.back(), 1.0, 1e-15);
    const double u1 = closed_form_u1(0.36, 1.0);
    for (const auto& v : f.minus) EXPECT_NEAR(v.x, u1, 1e-6);
    for (const auto& v : f.plus) EXPECT_NEAR(v.x, -u1, 1e-6);
    EXPECT_LE(f.norm_defect(), 1e-14);
    // first-component jump 2|u1(t)| at every saved time, never smeared; u3 flips sign too
    for (std::size_t n = 0; n < tr.times.size(); ++n) {
        const Vec3 j = tr.states[n].interface_jump();
        EXPECT_NEAR(std::fabs(j.x), 2.0 * closed_form_u1(0.36, tr.times[n]), 1e-6);
        EXPECT_EQ(j.y, 0.0);
    }
}

TEST(IntegrateLimit, EquilibriumIsConstant)
{
    SlabConfig c;
    c.cells_per_side = 8;
    const auto init = InitialData::constant({0, 1, 0}, {0, 1, 0}).sample(SlabDomain(c));
    const auto tr = integrate_limit(init, 1.0, 1e-2);
    for (const auto& v : tr.states.back().plus) EXPECT_EQ(v, (Vec3{0, 1, 0}));
    EXPECT_EQ(tr.norm_drift, 0.0);
}

TEST(IntegrateLimit, FourthOrder)
{
    std::vector<double> dts{1e-2, 5e-3, 2.5e-3}, errs;
    for (double dt : dts) {
        const auto p = integrate_point({0.6, 0.8, 0.0}, 1.0, dt);
        errs.push_back(std::fabs(p.u.back().x - closed_form_u1(0.36, 1.0)));
    }
    EXPECT_GE(loglog_slope(dts, errs), 3.7);
}

TEST(IntegrateLimit, RejectsLargeStepAndOffSphereData)
{
    EXPECT_THROW(integrate_point({0.6, 0.8, 0.0}, 3.0, 3.0), SolverAbort);
    SlabConfig c;
    c.cells_per_side = 8;
    auto f = MagnetizationField::on(SlabDomain(c), {1.0, 1.0, 0.0});
    EXPECT_THROW(integrate_limit(f, 1.0, 1e-2), ValidationError);
    EXPECT_THROW(step_count(1.0, 0.0), ValidationError);
}

TEST(IntegrateLimit, PluggableStrayCallbackAndSaveEvery)
{
    SlabConfig c;
    c.cells_per_side = 8;
    const auto init = InitialData::constant({0.6, 0.8, 0.0}, {0.6, 0.8, 0.0}).sample(SlabDomain(c));
    int calls = 0;
    StrayCallback zero = [&](const MagnetizationField& u) {
        ++calls;
        auto h = u;
        for (auto& v : h.minus) v = {};
        for (auto& v : h.plus) v = {};
        return h;
    };
    const auto tr = integrate_limit(init, 0.1, 1e-2, zero, 5);
    EXPECT_EQ(calls, 40);
    EXPECT_EQ(tr.times.size(), 3u);
    EXPECT_EQ(tr.states.back().minus.front(), (Vec3{0.6, 0.8, 0.0}));
}

TEST(PointTrajectory, HermiteDenseOutput)
{
    const auto p = integrate_point({0.6, 0.8, 0.0}, 1.0, 1e-2);
    EXPECT_EQ(p.at(0.5), p.u[50]);
    EXPECT_NEAR(p.at(0.505).x, closed_form_u1(0.36, 0.505), 1e-8);
    EXPECT_EQ(p.at(2.0), p.u.back());
}
