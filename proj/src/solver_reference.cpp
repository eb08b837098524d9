#include "mfg/solver.hpp"

#include <cmath>

namespace mfg::reference {

namespace {

Vector get(const std::vector<double>& a, std::size_t at, int n) { return Eigen::Map<const Vector>(&a[at], n); }

void put(std::vector<double>& a, std::size_t at, const Vector& v)
{
    for (Eigen::Index c = 0; c < v.size(); ++c) a[at + c] = v[c];
}

}  // namespace

void forward_pass(const ModelSpec& spec, const NoiseEnsemble& ens, CCIterate& it)
{
    const int n = spec.n, K = spec.K();
    const double dt = ens.grid.dt;
    const auto& M0 = spec.major;
    const auto& mi = spec.minor;
    for (int p = 0; p < it.P; ++p) {
        put(it.alpha0, it.major(0, p), M0.x0);
        for (int k = 0; k < K; ++k)
            for (int i = 0; i < it.M; ++i) put(it.alpha, it.minor(0, p, k, i), mi.x0);
        for (int j = 0; j <= it.J; ++j) {
            const double t = ens.grid.t(j);
            Vector phi = Vector::Zero(n);
            for (int k = 0; k < K; ++k) {
                std::vector<Vector> parts;
                for (int i = 0; i < it.M; ++i) parts.push_back(get(it.alpha, it.minor(j, p, k, i), n));
                const Vector mk = conditional_mean(parts);
                put(it.mean, it.mean_at(j, p, k), mk);
                phi += spec.types[k].pi * mk;
            }
            put(it.phi, it.major(j, p), phi);
            const Vector u0 = control_map(get(it.beta0, it.major(j, p), n), get(it.gamma0, it.major(j, p), n),
                                          M0.B.at(t), M0.D.at(t), M0.gamma, WeightedMetric(M0.R));
            put(it.u0, it.major_u(j, p), u0);
            for (int k = 0; k < K; ++k)
                for (int i = 0; i < it.M; ++i) {
                    const auto at = it.minor(j, p, k, i);
                    const auto& ty = spec.types[k];
                    put(it.u, it.minor_u(j, p, k, i),
                        control_map(get(it.beta, at, n), get(it.gamma, at, n), mi.B.at(t), ty.D.at(t), ty.gamma,
                                    WeightedMetric(ty.R)));
                }
            if (j == it.J) break;
            const Vector a0 = get(it.alpha0, it.major(j, p), n);
            const Vector next0 = a0 + (M0.A.at(t) * a0 + M0.B.at(t) * u0 + M0.F1.at(t) * phi + M0.b.at(t)) * dt +
                                 (M0.C.at(t) * a0 + M0.D.at(t) * u0 + M0.F2.at(t) * phi + M0.sigma.at(t)) *
                                     ens.common(p, j);
            put(it.alpha0, it.major(j + 1, p), next0);
            for (int k = 0; k < K; ++k)
                for (int i = 0; i < it.M; ++i) {
                    const auto& ty = spec.types[k];
                    const Vector a = get(it.alpha, it.minor(j, p, k, i), n);
                    const Vector u = get(it.u, it.minor_u(j, p, k, i), spec.m);
                    const Vector next =
                        a + (ty.A.at(t) * a + mi.B.at(t) * u + mi.F1.at(t) * phi + mi.b.at(t)) * dt +
                        (mi.C.at(t) * a + ty.D.at(t) * u + mi.F2.at(t) * phi + mi.H.at(t) * a0 + mi.sigma.at(t)) *
                            ens.particle(p, k, i, j);
                    if (!next.allFinite()) throw DivergenceError("non-finite state", p, k, i, j + 1);
                    put(it.alpha, it.minor(j + 1, p, k, i), next);
                }
        }
    }
}

BackwardStats backward_pass(const ModelSpec& spec, const NoiseEnsemble& ens, CCIterate& it, DriverMode mode)
{
    const int n = spec.n, K = spec.K(), P = it.P, M = it.M, J = it.J;
    const double dt = ens.grid.dt;
    const auto& M0 = spec.major;
    const auto& mi = spec.minor;
    const bool frozen = mode == DriverMode::Frozen;
    BackwardStats stats;
    double ysup = 0, zint = 0, z0int = 0;

    double y = 0;
    for (int p = 0; p < P; ++p) {
        const Vector phi = get(it.phi, it.major(J, p), n);
        const Vector a0 = get(it.alpha0, it.major(J, p), n);
        const Vector b0 = -M0.G * (a0 - M0.rho * phi);
        y += (b0 - get(it.beta0, it.major(J, p), n)).squaredNorm() / P;
        put(it.beta0, it.major(J, p), b0);
        for (int k = 0; k < K; ++k)
            for (int i = 0; i < M; ++i) {
                const auto at = it.minor(J, p, k, i);
                const Vector b = -mi.G * (get(it.alpha, at, n) - mi.rho * phi - (1 - mi.rho) * a0);
                y += (b - get(it.beta, at, n)).squaredNorm() / (P * M);
                put(it.beta, at, b);
            }
    }
    ysup = y;

    for (int j = J - 1; j >= 0; --j) {
        const double t = ens.grid.t(j);
        Design d0;
        Targets y0, z0t;
        d0.resize(P, n * (1 + K), P);
        y0.resize(P, n);
        z0t.resize(P, n);
        for (int p = 0; p < P; ++p) {
            for (int c = 0; c < n; ++c) d0.x(p)[c] = it.alpha0[it.major(j, p) + c];
            for (int c = 0; c < K * n; ++c) d0.x(p)[n + c] = it.mean[it.mean_at(j, p, 0) + c];
            for (int c = 0; c < n; ++c) y0.y(p)[c] = it.beta0[it.major(j + 1, p) + c];
        }
        const LinearFit e0 = fit_linear_reference(d0, y0);
        for (int p = 0; p < P; ++p) {
            Vector e(n);
            e0.predict(d0.x(p), e.data());
            for (int c = 0; c < n; ++c)
                z0t.y(p)[c] = (it.beta0[it.major(j + 1, p) + c] - e[c]) * (ens.common(p, j) / dt);
        }
        const LinearFit g0 = fit_linear_reference(d0, z0t);
        stats.warnings += e0.deficient;
        std::vector<Design> dk(K);
        std::vector<LinearFit> ek(K), gk(K);
        for (int k = 0; k < K; ++k) {
            Targets yk, zk;
            dk[k].resize(P * M, n * (2 + K), M);
            yk.resize(P * M, n);
            zk.resize(P * M, 2 * n);
            for (int p = 0; p < P; ++p)
                for (int i = 0; i < M; ++i) {
                    const int r = p * M + i;
                    const auto at = it.minor(j, p, k, i);
                    for (int c = 0; c < n; ++c) {
                        dk[k].x(r)[c] = it.alpha[at + c];
                        dk[k].x(r)[n + c] = it.alpha0[it.major(j, p) + c];
                    }
                    for (int c = 0; c < K * n; ++c) dk[k].x(r)[2 * n + c] = it.mean[it.mean_at(j, p, 0) + c];
                    const auto next = it.minor(j + 1, p, k, i);
                    for (int c = 0; c < n; ++c) yk.y(r)[c] = it.beta[next + c];
                }
            ek[k] = fit_linear_reference(dk[k], yk);
            for (int p = 0; p < P; ++p)
                for (int i = 0; i < M; ++i) {
                    const int r = p * M + i;
                    Vector e(n);
                    ek[k].predict(dk[k].x(r), e.data());
                    for (int c = 0; c < n; ++c) {
                        const double res = it.beta[it.minor(j + 1, p, k, i) + c] - e[c];
                        zk.y(r)[c] = res * (ens.particle(p, k, i, j) / dt);
                        zk.y(r)[n + c] = res * (ens.common(p, j) / dt);
                    }
                }
            gk[k] = fit_linear_reference(dk[k], zk);
            stats.warnings += ek[k].deficient;
        }
        double yj = 0, zj = 0, z0j = 0;
        for (int p = 0; p < P; ++p) {
            const Vector phi = get(it.phi, it.major(j, p), n);
            const Vector a0 = get(it.alpha0, it.major(j, p), n);
            Vector e(n), z(n);
            e0.predict(d0.x(p), e.data());
            g0.predict(d0.x(p), z.data());
            const Vector ob = get(it.beta0, it.major(j, p), n), og = get(it.gamma0, it.major(j, p), n);
            const Vector& ya = frozen ? ob : e;
            const Vector& za = frozen ? og : z;
            const Vector nb =
                e + dt * (M0.A.at(t).transpose() * ya - M0.Q * (a0 - M0.rho * phi) + M0.C.at(t).transpose() * za);
            yj += (nb - ob).squaredNorm() / P;
            zj += (z - og).squaredNorm() / P;
            put(it.beta0, it.major(j, p), nb);
            put(it.gamma0, it.major(j, p), z);
            for (int k = 0; k < K; ++k)
                for (int i = 0; i < M; ++i) {
                    Vector ek_(n), pk(2 * n);
                    ek[k].predict(dk[k].x(p * M + i), ek_.data());
                    gk[k].predict(dk[k].x(p * M + i), pk.data());
                    const auto at = it.minor(j, p, k, i);
                    const Vector& ekv = ek_;
                    const Vector zk = pk.head(n), z0k = pk.tail(n);
                    const Vector obk = get(it.beta, at, n), ogk = get(it.gamma, at, n);
                    const Vector& yak = frozen ? obk : ekv;
                    const Vector& zak = frozen ? ogk : zk;
                    const Vector dev = get(it.alpha, at, n) - mi.rho * phi - (1 - mi.rho) * a0;
                    const Vector nbk = ekv + dt * (spec.types[k].A.at(t).transpose() * yak - mi.Q * dev +
                                                  mi.C.at(t).transpose() * zak);
                    yj += (nbk - obk).squaredNorm() / (P * M);
                    zj += (zk - ogk).squaredNorm() / (P * M);
                    z0j += (z0k - get(it.gamma_k0, at, n)).squaredNorm() / (P * M);
                    put(it.beta, at, nbk);
                    put(it.gamma, at, zk);
                    put(it.gamma_k0, at, z0k);
                }
        }
        ysup = std::max(ysup, yj);
        zint += dt * zj;
        z0int += dt * z0j;
    }
    for (int p = 0; p < P; ++p) {
        for (int c = 0; c < n; ++c) it.gamma0[it.major(J, p) + c] = it.gamma0[it.major(J - 1, p) + c];
        for (int k = 0; k < K; ++k)
            for (int i = 0; i < M; ++i)
                for (int c = 0; c < n; ++c) {
                    it.gamma[it.minor(J, p, k, i) + c] = it.gamma[it.minor(J - 1, p, k, i) + c];
                    it.gamma_k0[it.minor(J, p, k, i) + c] = it.gamma_k0[it.minor(J - 1, p, k, i) + c];
                }
    }
    stats.delta = std::sqrt(ysup + zint + z0int);
    return stats;
}

}  // namespace mfg::reference
