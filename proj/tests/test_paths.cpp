#include "mfg/paths.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mfg;

TEST(Philox, KnownAnswers)
{
    using C = Philox4x32::Counter;
    EXPECT_EQ(Philox4x32::block({0, 0, 0, 0}, {0, 0}), (C{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8}));
    EXPECT_EQ(Philox4x32::block({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}),
              (C{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd}));
    EXPECT_EQ(Philox4x32::block({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}),
              (C{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1}));
}

TEST(Grid, LastNodeIsExact)
{
    const TimeGrid g(0.3, 7);
    EXPECT_EQ(g.t(7), 0.3);
    EXPECT_EQ(g.t(0), 0.0);
    EXPECT_THROW(TimeGrid(1.0, 0), ConfigError);
}

TEST(Ensemble, Deterministic)
{
    const TimeGrid g(1.0, 5);
    const auto a = sample_ensemble(g, 3, 4, 2, 99);
    const auto b = sample_ensemble(g, 3, 4, 2, 99);
    EXPECT_EQ(a.dW0, b.dW0);
    EXPECT_EQ(a.dW, b.dW);
    const auto c = sample_ensemble(g, 3, 4, 2, 100);
    EXPECT_NE(a.dW, c.dW);
}

TEST(Ensemble, StreamAddressingIsOrderFree)
{
    const TimeGrid g(1.0, 4);
    const auto e = sample_ensemble(g, 5, 6, 2, 7);
    // Regenerate in reverse order, one stream at a time.
    for (int p = 4; p >= 0; --p)
        for (int k = 1; k >= 0; --k)
            for (int i = 5; i >= 0; --i)
                for (int j = 3; j >= 0; --j) EXPECT_EQ(e.particle(p, k, i, j), particle_increment(7, g.dt, p, k, i, j));
    for (int p = 0; p < 5; ++p)
        for (int j = 0; j < 4; ++j) EXPECT_EQ(e.common(p, j), common_increment(7, g.dt, p, j));
    // A larger ensemble contains the smaller one.
    const auto big = sample_ensemble(g, 8, 9, 2, 7);
    EXPECT_EQ(big.particle(3, 1, 4, 2), e.particle(3, 1, 4, 2));
}

TEST(Ensemble, CommonIncrementMean)
{
    const TimeGrid g(1.0, 10);
    const auto e = sample_ensemble(g, 10000, 1, 1, 3);
    for (int j = 0; j < g.J; ++j) {
        double s = 0;
        for (int p = 0; p < e.P; ++p) s += e.common(p, j);
        EXPECT_LE(std::abs(s / e.P), 4.0 * std::sqrt(g.dt / e.P));
    }
}

TEST(Ensemble, ParticleIncrementVariance)
{
    const TimeGrid g(0.5, 4);
    const auto e = sample_ensemble(g, 100, 100, 1, 5);
    for (int j = 0; j < g.J; ++j) {
        double s = 0, s2 = 0;
        for (int p = 0; p < e.P; ++p)
            for (int i = 0; i < e.M; ++i) {
                const double v = e.particle(p, 0, i, j);
                s += v;
                s2 += v * v;
            }
        const double n = e.P * e.M;
        const double var = (s2 - s * s / n) / (n - 1);
        EXPECT_NEAR(var / g.dt, 1.0, 0.05);
    }
}

TEST(Ensemble, CapacityCheckedBeforeAllocation)
{
    const TimeGrid g(1.0, 1000);
    EXPECT_THROW(sample_ensemble(g, 1000, 100000, 4, 1, std::size_t(1) << 20), CapacityError);
}

TEST(ConditionalMean, Examples)
{
    const std::vector<Vector> same(5, Vector::Constant(2, 3.5));
    EXPECT_EQ(conditional_mean(same), Vector::Constant(2, 3.5));
    const double two[] = {1.0, 3.0};
    EXPECT_EQ(conditional_mean(two, 2, 1)[0], 2.0);
    EXPECT_THROW(conditional_mean(two, 0, 1), PreconditionError);
}

TEST(ConditionalMean, CltBound)
{
    const int M = 4096;
    std::vector<double> v(M);
    const double mu = 1.7;
    for (int i = 0; i < M; ++i) v[i] = mu + normal_at(77, StreamRole::Sampling, i, 0, 0, 0);
    EXPECT_LE(std::abs(conditional_mean(v.data(), M, 1)[0] - mu), 4.0 / std::sqrt(M));
}

TEST(PhiField, Examples)
{
    const Vector v = Vector::Constant(1, 2.5);
    EXPECT_EQ(phi_field({v}, Vector::Ones(1)), v);
    const Vector pi = (Vector(2) << 0.4, 0.6).finished();
    EXPECT_NEAR(phi_field({Vector::Constant(1, 1.0), Vector::Constant(1, 2.0)}, pi)[0], 1.6, 1e-15);
    EXPECT_EQ(phi_field({Vector::Zero(3), Vector::Zero(3)}, pi), Vector::Zero(3));
}

TEST(Normals, MomentsAndRange)
{
    double s = 0, s2 = 0, s4 = 0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double z = normal_at(1, StreamRole::Sampling, i, 1, 2, 3);
        ASSERT_TRUE(std::isfinite(z));
        s += z;
        s2 += z * z;
        s4 += z * z * z * z;
    }
    EXPECT_NEAR(s / n, 0.0, 0.01);
    EXPECT_NEAR(s2 / n, 1.0, 0.01);
    EXPECT_NEAR(s4 / n, 3.0, 0.06);
}
