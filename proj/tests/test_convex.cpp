#include "mfg/convex.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace mfg;

namespace {

Vector vec(std::initializer_list<double> v)
{
    Vector x(static_cast<Eigen::Index>(v.size()));
    Eigen::Index i = 0;
    for (double d : v) x[i++] = d;
    return x;
}

// Dual projected-gradient oracle for min 1/2|y-x|_R^2 s.t. E y <= h.
Vector dual_oracle(const Vector& x, const Matrix& R, const Matrix& E, const Vector& h)
{
    const Matrix Ri = R.inverse();
    const Matrix S = E * Ri * E.transpose();
    const double step = 1.0 / (S.norm() + 1e-12);
    Vector lam = Vector::Zero(E.rows());
    for (int it = 0; it < 400000; ++it) {
        const Vector y = x - Ri * E.transpose() * lam;
        lam = (lam + step * (E * y - h)).cwiseMax(0.0);
    }
    return x - Ri * E.transpose() * lam;
}

Matrix random_spd(int m, std::mt19937_64& rng, double spread = 3.0)
{
    std::normal_distribution<double> g;
    Matrix a(m, m);
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j) a(i, j) = g(rng);
    return a * a.transpose() / m + Matrix::Identity(m, m) / spread;
}

}  // namespace

TEST(Convex, FullSpaceIsIdentity)
{
    const Matrix R = (Matrix(2, 2) << 2, 1, 1, 2).finished();
    EXPECT_EQ(project(vec({1, -2}), ConstraintSet::full_space(2), WeightedMetric(R)), vec({1, -2}));
}

TEST(Convex, OrthantDiagonalClamps)
{
    const Matrix R = vec({1, 3}).asDiagonal();
    EXPECT_EQ(project(vec({1, -2}), ConstraintSet::orthant(2), WeightedMetric(R)), vec({1, 0}));
}

TEST(Convex, SubspaceClosedFormMatchesGridSearch)
{
    const Matrix U = (Matrix(1, 2) << 1, 1).finished();
    const Vector px = project(vec({1, 0}), ConstraintSet::subspace(U), WeightedMetric(Matrix::Identity(2, 2)));
    EXPECT_NEAR(px[0], 0.5, 1e-14);
    EXPECT_NEAR(px[1], -0.5, 1e-14);
    double best = 1e300, arg = 0;
    for (int s = -200000; s <= 200000; ++s) {
        const double t = s * 1e-5;
        const double d = (t - 1) * (t - 1) + t * t;
        if (d < best) {
            best = d;
            arg = t;
        }
    }
    EXPECT_NEAR(px[0], arg, 1e-5);
}

TEST(Convex, OrthantNonDiagonalMatchesGridOracle)
{
    const Matrix R = (Matrix(2, 2) << 2, 1, 1, 2).finished();
    const Vector x = vec({-1, 1});
    double best = 1e300;
    Vector arg(2);
    for (int a = 0; a <= 300; ++a)
        for (int b = 0; b <= 300; ++b) {
            const Vector y = vec({a * 0.01, b * 0.01});
            const double d = (y - x).dot(R * (y - x));
            if (d < best) {
                best = d;
                arg = y;
            }
        }
    const Vector px = project(x, ConstraintSet::orthant(2), WeightedMetric(R));
    EXPECT_NEAR(px[0], arg[0], 1e-2);
    EXPECT_NEAR(px[1], arg[1], 1e-2);
    EXPECT_NEAR(px[0], 0.0, 1e-14);
    EXPECT_NEAR(px[1], 0.5, 1e-14);
}

TEST(Convex, ActiveSetMatchesDualOracle)
{
    std::mt19937_64 rng(11);
    std::normal_distribution<double> g;
    for (int trial = 0; trial < 20; ++trial) {
        const int m = 2 + trial % 3, r = 1 + trial % 4;
        const Matrix R = random_spd(m, rng);
        Vector x(m);
        for (auto& v : x) v = 2 * g(rng);
        Matrix U(r, m);
        for (int i = 0; i < r; ++i)
            for (int j = 0; j < m; ++j) U(i, j) = g(rng);
        const Vector px = project(x, ConstraintSet::cone(U), WeightedMetric(R));
        const Vector ref = dual_oracle(x, R, U, Vector::Zero(r));
        EXPECT_LT((px - ref).norm(), 1e-6) << "trial " << trial;

        Vector lo(m), hi(m);
        for (int i = 0; i < m; ++i) {
            lo[i] = -std::abs(g(rng));
            hi[i] = std::abs(g(rng));
        }
        Matrix E(2 * m, m);
        E << Matrix::Identity(m, m), -Matrix::Identity(m, m);
        Vector h(2 * m);
        h << hi, -lo;
        const Vector pb = project(x, ConstraintSet::box(lo, hi), WeightedMetric(R));
        EXPECT_LT((pb - dual_oracle(x, R, E, h)).norm(), 1e-6) << "trial " << trial;
    }
}

TEST(Convex, BoxWithInfiniteBounds)
{
    const double inf = std::numeric_limits<double>::infinity();
    const auto box = ConstraintSet::box(vec({-1, -inf}), vec({inf, 0.5}));
    const Vector px = project(vec({-3, 2}), box, WeightedMetric(Matrix::Identity(2, 2)));
    EXPECT_EQ(px, vec({-1, 0.5}));
    EXPECT_THROW(ConstraintSet::box(vec({0.5}), vec({1.0})), ConfigError);
}

TEST(Convex, ControlMapExamples)
{
    const Matrix one = Matrix::Identity(1, 1);
    EXPECT_NEAR(control_map(vec({4}), vec({7}), one, Matrix::Zero(1, 1), ConstraintSet::full_space(1),
                            WeightedMetric(2 * one))[0],
                2.0, 1e-15);
    EXPECT_EQ(control_map(vec({1}), vec({-3}), one, one, ConstraintSet::orthant(1), WeightedMetric(one))[0], 0.0);
    const Matrix U = (Matrix(1, 2) << 1, -2).finished();
    for (const auto& set : {ConstraintSet::full_space(2), ConstraintSet::orthant(2), ConstraintSet::subspace(U),
                            ConstraintSet::cone(U)}) {
        const Vector u = control_map(Vector::Zero(3), Vector::Zero(3), Matrix::Ones(3, 2), Matrix::Ones(3, 2), set,
                                     WeightedMetric(Matrix::Identity(2, 2)));
        EXPECT_EQ(u.norm(), 0.0);
    }
}

TEST(Convex, ControlMapLipschitz)
{
    std::mt19937_64 rng(5);
    std::normal_distribution<double> g;
    const int n = 3, m = 2;
    for (int trial = 0; trial < 50; ++trial) {
        const Matrix R = random_spd(m, rng);
        Matrix B(n, m), D(n, m);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < m; ++j) {
                B(i, j) = g(rng);
                D(i, j) = g(rng);
            }
        const WeightedMetric metric(R);
        const auto set = ConstraintSet::orthant(m);
        Vector p1(n), q1(n), p2(n), q2(n);
        for (int i = 0; i < n; ++i) {
            p1[i] = g(rng);
            q1[i] = g(rng);
            p2[i] = g(rng);
            q2[i] = g(rng);
        }
        const Vector u1 = control_map(p1, q1, B, D, set, metric);
        const Vector u2 = control_map(p2, q2, B, D, set, metric);
        // Non-expansive in |.|_R; converted to the Euclidean norm with the extreme eigenvalues of R.
        const double lip = metric.R_inv().norm() * (B.norm() + D.norm()) * std::sqrt(metric.condition());
        EXPECT_LE((u1 - u2).norm(), lip * std::max((p1 - p2).norm(), (q1 - q2).norm()) + 1e-12);
    }
}

TEST(Convex, VariationalResidualExamples)
{
    const WeightedMetric I(Matrix::Identity(2, 2));
    const auto orth = ConstraintSet::orthant(2);
    const Vector x = vec({1.5, -2});
    EXPECT_LE(variational_residual(x, project(x, orth, I), orth, I, 1000), 1e-9);
    EXPECT_GT(variational_residual(x, x, orth, I, 1000), 0.0);
    EXPECT_LE(variational_residual(vec({-1, -1}), vec({0, 0}), orth, I, 1000), 1e-15);
    EXPECT_GT(variational_residual(x, vec({1.5, 1.0}), orth, I, 1000), 0.0);
}

TEST(Convex, MetricFactorReproducesNorm)
{
    std::mt19937_64 rng(3);
    std::normal_distribution<double> g;
    const Matrix R = random_spd(4, rng);
    const WeightedMetric metric(R);
    for (int s = 0; s < 100; ++s) {
        Vector x(4);
        for (auto& v : x) v = g(rng);
        EXPECT_NEAR(metric.norm(x) * metric.norm(x), x.dot(R * x), 1e-12 * (1 + x.dot(R * x)));
    }
    EXPECT_THROW(WeightedMetric(Matrix::Zero(2, 2)), NumericError);
}

TEST(Convex, SeparableProjectionIgnoresDiagonalWeights)
{
    std::mt19937_64 rng(9);
    std::normal_distribution<double> g;
    const auto box = ConstraintSet::box(vec({-0.5, -1, 0}), vec({0.5, 2, 1}));
    for (int s = 0; s < 50; ++s) {
        Vector x(3), w(3);
        for (int i = 0; i < 3; ++i) {
            x[i] = 2 * g(rng);
            w[i] = 0.1 + std::abs(g(rng));
        }
        EXPECT_EQ(project(x, box, WeightedMetric(w.asDiagonal())),
                  project(x, box, WeightedMetric(Matrix::Identity(3, 3))));
    }
}
