#include "mfg/regression.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace mfg;

namespace {

struct Problem {
    Design d;
    Targets t;
};

Problem random_problem(int rows, int nx, int q, int block, std::mt19937_64& rng)
{
    std::normal_distribution<double> g;
    Problem pr;
    pr.d.resize(rows, nx, block);
    pr.t.resize(rows, q);
    for (auto& v : pr.d.X) v = 1.0 + g(rng);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < q; ++c) {
            double y = 0.5 * c;
            for (int k = 0; k < nx; ++k) y += (k + 1.0) * (c + 1) * pr.d.x(r)[k];
            pr.t.y(r)[c] = y + 0.1 * g(rng);
        }
    return pr;
}

}  // namespace

TEST(Regression, RecoversExactLinearModel)
{
    Design d;
    Targets t;
    d.resize(6, 1, 3);
    t.resize(6, 1);
    for (int r = 0; r < 6; ++r) {
        d.x(r)[0] = r;
        t.y(r)[0] = 2.0 - 3.0 * r;
    }
    const auto f = fit_linear(d, t);
    EXPECT_NEAR(f.intercept[0], 2.0, 1e-12);
    EXPECT_NEAR(f.slope(0, 0), -3.0, 1e-12);
    EXPECT_FALSE(f.deficient);
}

TEST(Regression, MatchesQrReference)
{
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const Problem pr = random_problem(120, 1 + trial % 4, 1 + trial % 3, 12, rng);
        const auto a = fit_linear(pr.d, pr.t), b = fit_linear_reference(pr.d, pr.t);
        std::vector<double> ya(pr.t.q), yb(pr.t.q);
        for (int r = 0; r < pr.d.rows; ++r) {
            a.predict(pr.d.x(r), ya.data());
            b.predict(pr.d.x(r), yb.data());
            for (int c = 0; c < pr.t.q; ++c) EXPECT_NEAR(ya[c], yb[c], 1e-10);
        }
    }
}

TEST(Regression, FactorizationReusedAcrossTargets)
{
    std::mt19937_64 rng(9);
    Problem pr = random_problem(80, 3, 2, 8, rng);
    const LeastSquares ls(pr.d);
    Targets other;
    other.resize(80, 1);
    for (int r = 0; r < 80; ++r) other.y(r)[0] = pr.t.y(r)[1] - 4.0 * pr.d.x(r)[2];
    const auto a = ls.fit(other), b = fit_linear_reference(pr.d, other);
    for (int r = 0; r < 80; ++r) {
        double ya, yb;
        a.predict(pr.d.x(r), &ya);
        b.predict(pr.d.x(r), &yb);
        EXPECT_NEAR(ya, yb, 1e-10);
    }
}

TEST(Regression, ConstantColumnFallsBackToMean)
{
    Design d;
    Targets t;
    d.resize(4, 2, 2);
    t.resize(4, 1);
    const double ys[] = {1, 2, 3, 6};
    for (int r = 0; r < 4; ++r) {
        d.x(r)[0] = 5.0;
        d.x(r)[1] = 5.0;
        t.y(r)[0] = ys[r];
    }
    for (const auto& f : {fit_linear(d, t), fit_linear_reference(d, t)}) {
        EXPECT_TRUE(f.deficient);
        double out;
        f.predict(d.x(0), &out);
        EXPECT_NEAR(out, 3.0, 1e-14);
    }
}

TEST(Regression, CollinearColumnsGiveUniqueFit)
{
    std::mt19937_64 rng(2);
    Problem pr = random_problem(50, 2, 1, 5, rng);
    for (int r = 0; r < pr.d.rows; ++r) pr.d.x(r)[1] = 2.0 * pr.d.x(r)[0] + 1.0;
    const auto a = fit_linear(pr.d, pr.t), b = fit_linear_reference(pr.d, pr.t);
    EXPECT_TRUE(a.deficient);
    for (int r = 0; r < pr.d.rows; ++r) {
        double ya, yb;
        a.predict(pr.d.x(r), &ya);
        b.predict(pr.d.x(r), &yb);
        EXPECT_NEAR(ya, yb, 1e-9);
    }
}
