#pragma once

#include "mfg/model.hpp"
#include "mfg/solver.hpp"

#include <cmath>
#include <vector>

namespace mfg::testing {

inline Matrix s1(double v) { return Matrix::Constant(1, 1, v); }
inline Vector v1(double v) { return Vector::Constant(1, v); }

/// Scalar unconstrained benchmark with a closed-form Riccati feedback.
inline ModelSpec riccati_spec(double sigma0 = 0.02, double sigma = 0.3)
{
    ModelSpec s = scalar_spec(1);
    s.major.A = s1(-1.0);
    s.major.B = s1(1.0);
    s.major.Q = s1(1.0);
    s.major.G = s1(1.0);
    s.major.sigma = v1(sigma0);
    s.minor.B = s1(1.0);
    s.minor.Q = s1(1.0);
    s.minor.G = s1(1.0);
    s.minor.sigma = v1(sigma);
    s.types[0].A = s1(-1.0);
    return s;
}

/// Scalar benchmark with mean-field coupling in every channel, for population studies.
inline ModelSpec nash_spec(double T = 1.0)
{
    ModelSpec s = riccati_spec(0.3, 0.5);
    s.T = T;
    s.major.F1 = s1(0.3);
    s.major.F2 = s1(0.2);
    s.major.rho = 0.5;
    s.major.x0 = v1(1.0);
    s.minor.F1 = s1(0.3);
    s.minor.F2 = s1(0.2);
    s.minor.H = s1(0.2);
    s.minor.rho = 0.5;
    s.minor.x0 = v1(-0.5);
    return s;
}

/// Gains on the grid t_j = j T / J for u0 = -P0 x0 and u = -P x + S x0.
struct RiccatiGains {
    std::vector<double> P0, P, S;
};

/// RK4 backward from T with the given step; nodes must fall on the step grid.
inline RiccatiGains riccati_gains(double a0, double a, double T, int J, double h = 1e-6)
{
    const long steps = std::lround(T / h);
    const long per = steps / J;
    RiccatiGains g;
    g.P0.assign(J + 1, 0.0);
    g.P.assign(J + 1, 0.0);
    g.S.assign(J + 1, 0.0);
    double y[3] = {1.0, 1.0, 1.0};  // P0, P, S at t
    auto rhs = [&](const double* v, double* d) {
        d[0] = -2 * a0 * v[0] + v[0] * v[0] - 1.0;
        d[1] = -2 * a * v[1] + v[1] * v[1] - 1.0;
        d[2] = v[1] * v[2] - v[2] * (a0 - v[0]) - a * v[2] - 1.0;
    };
    g.P0[J] = y[0];
    g.P[J] = y[1];
    g.S[J] = y[2];
    const double dt = -T / steps;
    for (long s = 1; s <= steps; ++s) {
        double k1[3], k2[3], k3[3], k4[3], t[3];
        rhs(y, k1);
        for (int c = 0; c < 3; ++c) t[c] = y[c] + 0.5 * dt * k1[c];
        rhs(t, k2);
        for (int c = 0; c < 3; ++c) t[c] = y[c] + 0.5 * dt * k2[c];
        rhs(t, k3);
        for (int c = 0; c < 3; ++c) t[c] = y[c] + dt * k3[c];
        rhs(t, k4);
        for (int c = 0; c < 3; ++c) y[c] += dt / 6 * (k1[c] + 2 * k2[c] + 2 * k3[c] + k4[c]);
        if (s % per == 0) {
            const long node = J - s / per;
            g.P0[node] = y[0];
            g.P[node] = y[1];
            g.S[node] = y[2];
        }
    }
    return g;
}

struct RiccatiError {
    double major = 0, minor = 0;
};

/// Relative discrete L2 error of the solved controls against the feedback
/// evaluated on the solved states, nodes 0..J-1.
inline RiccatiError riccati_error(const CCSolution& sol, const RiccatiGains& g)
{
    const auto& it = sol.it;
    double e0 = 0, n0 = 0, e1 = 0, n1 = 0;
    for (int j = 0; j < it.J; ++j)
        for (int p = 0; p < it.P; ++p) {
            const double a0 = it.alpha0[it.major(j, p)];
            const double r0 = -g.P0[j] * a0;
            e0 += std::pow(it.u0[it.major_u(j, p)] - r0, 2);
            n0 += r0 * r0;
            for (int i = 0; i < it.M; ++i) {
                const double r = -g.P[j] * it.alpha[it.minor(j, p, 0, i)] + g.S[j] * a0;
                e1 += std::pow(it.u[it.minor_u(j, p, 0, i)] - r, 2);
                n1 += r * r;
            }
        }
    return {std::sqrt(e0 / n0), std::sqrt(e1 / n1)};
}

/// Two-dimensional, two-type spec exercising every coupling term and three
/// constraint families. `g` scales the terminal weights.
inline ModelSpec coupled_spec(double T = 0.5, double g = 1.0)
{
    ModelSpec s;
    s.n = s.m = 2;
    s.T = T;
    Matrix a0(2, 2), a(2, 2), c(2, 2), e(2, 2);
    a0 << -0.5, 0.2, 0.0, -0.3;
    a << -0.4, 0.1, -0.1, -0.2;
    c << 0.1, 0.0, 0.05, 0.1;
    e << 0.2, 0.0, 0.0, 0.1;
    const Matrix I = Matrix::Identity(2, 2);
    const Matrix z = Matrix::Zero(2, 2);
    Vector sig0(2), sig(2), b0(2), x0(2), x(2);
    sig0 << 0.3, 0.2;
    sig << 0.4, 0.3;
    b0 << 0.1, -0.1;
    x0 << 1.0, -0.5;
    x << 0.5, 0.5;
    s.major = MajorSpec{a0, I, c, 0.1 * I, e, 0.5 * e, TimeVector({0.0, 0.5 * T}, {b0, Vector(-b0)}), sig0,
                        I, I, g * I, 0.3, x0, ConstraintSet::orthant(2)};
    s.minor = MinorShared{I, c, e, z, 0.5 * e, Vector::Zero(2), sig, I, g * I, 0.6, x};
    Vector lo(2), hi(2);
    lo << -0.3, -1.0;
    hi << 0.3, 1.0;
    Matrix ups(1, 2);
    ups << 1.0, 1.0;
    s.types.push_back(MinorType{a, 0.1 * I, I, 0.6, ConstraintSet::box(lo, hi)});
    s.types.push_back(MinorType{TimeMatrix(Matrix(a.transpose())), z, 2.0 * I, 0.4, ConstraintSet::subspace(ups)});
    return s;
}

}  // namespace mfg::testing
