#include "ferrolayer/geometry.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace ferrolayer;

TEST(SlabDomain, UniformEightCells)
{
    SlabConfig c;
    c.cells_per_side = 8;
    const SlabDomain d(c);
    ASSERT_EQ(d.minus_nodes().size(), 9u);
    ASSERT_EQ(d.plus_nodes().size(), 9u);
    EXPECT_EQ(d.minus_nodes().front(), -1.0);
    EXPECT_EQ(d.minus_nodes().back(), 0.0);
    EXPECT_EQ(d.plus_nodes().front(), 0.0);
    EXPECT_EQ(d.plus_nodes().back(), 1.0);
    for (std::size_t i = 1; i < 9; ++i) {
        EXPECT_NEAR(d.minus_nodes()[i] - d.minus_nodes()[i - 1], 0.125, 1e-15);
        EXPECT_NEAR(d.plus_nodes()[i] - d.plus_nodes()[i - 1], 0.125, 1e-15);
    }
    EXPECT_EQ(d.merged_nodes().size(), 17u);
    EXPECT_EQ(d.two_sided_nodes().size(), 18u);
}

TEST(SlabDomain, GeometricTowardSigma)
{
    SlabConfig c;
    c.cells_per_side = 8;
    c.grading = {Grading::Kind::geometric, Grading::Toward::sigma, 0.5};
    const SlabDomain d(c);
    // partition by direct summation of the series, smallest cell adjacent to Σ
    double sum = 0.0;
    for (int k = 0; k < 8; ++k) sum += std::pow(0.5, k);
    const double smallest = std::pow(0.5, 7) / sum;
    EXPECT_NEAR(smallest, (1 - 0.5) / (1 - std::pow(0.5, 8)) * std::pow(0.5, 7), 1e-15);
    const auto m = d.minus_nodes();
    const auto p = d.plus_nodes();
    EXPECT_NEAR(m[8] - m[7], smallest, 1e-14);
    EXPECT_NEAR(p[1] - p[0], smallest, 1e-14);
    EXPECT_NEAR(d.min_width(), smallest, 1e-14);
    for (std::size_t i = 2; i < m.size(); ++i) EXPECT_NEAR((m[i] - m[i - 1]) / (m[i - 1] - m[i - 2]), 0.5, 1e-12);
    for (std::size_t i = 2; i < p.size(); ++i) EXPECT_NEAR((p[i] - p[i - 1]) / (p[i - 1] - p[i - 2]), 2.0, 1e-12);
}

TEST(SlabDomain, GeometricTowardBothIsMonotoneInBands)
{
    SlabConfig c;
    c.cells_per_side = 16;
    c.grading = {Grading::Kind::geometric, Grading::Toward::both, 0.7};
    const SlabDomain d(c);
    const auto m = d.minus_nodes();
    for (std::size_t i = 1; i < m.size(); ++i) EXPECT_GT(m[i] - m[i - 1], 0.0);
    EXPECT_NEAR(m[1] - m[0], m[16] - m[15], 1e-14);
    EXPECT_LT(m[1] - m[0], m[8] - m[7]);
}

TEST(SlabDomain, RejectsBadInput)
{
    SlabConfig c;
    c.cells_per_side = 0;
    EXPECT_THROW(SlabDomain{c}, ValidationError);
    c.cells_per_side = 7;
    EXPECT_THROW(SlabDomain{c}, ValidationError);
    c.cells_per_side = 8;
    c.grading = {Grading::Kind::geometric, Grading::Toward::sigma, 1.5};
    EXPECT_THROW(SlabDomain{c}, ValidationError);
    c.grading = {Grading::Kind::geometric, Grading::Toward::sigma, 1e-3};
    c.cells_per_side = 40;
    EXPECT_THROW(SlabDomain{c}, ValidationError); // narrowest cell below 1e-12
}

TEST(LevelSets, DistanceFunctions)
{
    const LevelSets ls;
    EXPECT_EQ(ls.psi(0.0), 0.0);
    for (double x : {-0.9, -0.3, 0.2, 0.8}) {
        EXPECT_GT(ls.psi(x) * x, 0.0);
        EXPECT_GT(ls.phi(x), 0.0);
    }
    EXPECT_EQ(ls.phi(1.0), 0.0);
    EXPECT_EQ(ls.phi(-1.0), 0.0);
    const double h = 1e-6;
    for (double x : {-0.2, 0.1, 0.3}) EXPECT_NEAR(std::fabs((ls.psi(x + h) - ls.psi(x - h)) / (2 * h)), 1.0, 1e-9);
    for (double x : {-0.9, 0.8, 0.95}) EXPECT_NEAR(std::fabs((ls.phi(x + h) - ls.phi(x - h)) / (2 * h)), 1.0, 1e-9);
}

TEST(LevelSets, CutoffIsOneNearGammaAndZeroOutside)
{
    const LevelSets ls;
    EXPECT_EQ(ls.theta(1.0), 1.0);
    EXPECT_EQ(ls.theta(-0.9), 1.0);
    EXPECT_EQ(ls.theta(0.7), 0.0);
    EXPECT_EQ(ls.theta(0.0), 0.0);
    double maxd2 = 0.0;
    const double h = 1e-3;
    for (double x = -1.0 + h; x < 1.0 - h; x += h)
        maxd2 = std::max(maxd2, std::fabs(ls.theta(x + h) - 2 * ls.theta(x) + ls.theta(x - h)) / (h * h));
    // quintic smoothstep over a band of width w/2 = 0.125: |θ''| ≤ (10/√3)/0.125² ≈ 370
    EXPECT_LT(maxd2, 400.0);
}

TEST(LevelSets, NeighbourhoodsAreDisjoint)
{
    const LevelSets ls;
    for (double x = -1.0; x <= 1.0; x += 1.0 / 512) EXPECT_EQ(ls.in_v_sigma(x) ? ls.theta(x) : 0.0, 0.0);
    LevelSets bad;
    bad.v_sigma_halfwidth = 0.8;
    EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Conormal, WeightValues)
{
    EXPECT_EQ(conormal_weight(0.0), 0.0);
    EXPECT_EQ(conormal_weight(1.0), 0.0);
    EXPECT_EQ(conormal_weight(-1.0), 0.0);
    EXPECT_DOUBLE_EQ(conormal_weight(0.5), 0.375);
    SlabConfig c;
    c.cells_per_side = 64;
    const auto z = conormal_fields(SlabDomain(c).merged_nodes());
    const auto x = SlabDomain(c).merged_nodes();
    ASSERT_EQ(z.weight.size(), x.size());
    EXPECT_TRUE(z.has_time_field);
    for (std::size_t i = 0; i < x.size(); ++i)
        EXPECT_LE(std::fabs(z.weight[i]), 2.0 * std::min(std::fabs(x[i]), 1.0 - std::fabs(x[i])) + 1e-15);
}

TEST(Smoothstep, EndpointsAndFlatness)
{
    EXPECT_EQ(smoothstep5(0.0), 0.0);
    EXPECT_EQ(smoothstep5(1.0), 1.0);
    EXPECT_EQ(smoothstep5(0.5), 0.5);
    const double h = 1e-4;
    EXPECT_NEAR((smoothstep5(h) - smoothstep5(0.0)) / h, 0.0, 1e-6);
    EXPECT_NEAR((smoothstep5(1.0) - smoothstep5(1.0 - h)) / h, 0.0, 1e-6);
}
