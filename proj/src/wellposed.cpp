#include "mfg/wellposed.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace mfg {

namespace {

double worst(const TimeMatrix& m)
{
    double w = 0.0;
    for (const auto& v : m.values()) w = std::max(w, fro(v));
    return w;
}

}  // namespace

A4Report check_A4(const ModelSpec& spec)
{
    A4Report r;
    const double g0 = fro(spec.major.G), g = fro(spec.minor.G);
    const double rho0 = spec.major.rho, rho = spec.minor.rho;
    r.M0 = std::max(g0 * g0 * (1.0 + rho0 * rho0), g * g * (1.0 + rho * rho + (1.0 - rho) * (1.0 - rho)));
    r.Dmax = worst(spec.major.D);
    for (const auto& ty : spec.types) r.Dmax = std::max(r.Dmax, worst(ty.D));
    r.product = r.M0 * r.Dmax * r.Dmax;
    r.pass = r.product < 1.0;
    return r;
}

std::string to_string(CertificateVariant v) { return v == CertificateVariant::NormBound ? "norm" : "eigen"; }

const GlobalCertificate& GlobalReport::best() const
{
    if (eigen.rho_cert < norm.rho_cert) return eigen;
    return norm;
}

namespace {

double lambda_bar1(const H1Constants& c, double k1, double lambda, double K1, double K2)
{
    return lambda - 2 * c.lambda1 - c.k2 / K1 - c.k3 / K2 - 2 * k1 - c.k7_sq - c.k8_sq;
}

double lambda_bar2(const H1Constants& c, double lambda, double K3, double K4)
{
    return -lambda - 2 * c.lambda2 - (c.k4 + c.k5) / K3 - c.k6 / K4;
}

// rho = u (k11^2 + k12^2 + v / lb1) w with u = 1/lb2 + 1/(1 - k6 K4), v = (k4 + k5) K3,
// w = max(k2 K1 + k9^2, k3 K2 + k10^2); the grid search evaluates the same factors.
double rho_u(const H1Constants& c, double lb2, double K4)
{
    const double slack = 1.0 - c.k6 * K4;
    if (!(lb2 > 0 && slack > 0)) return std::numeric_limits<double>::infinity();
    return 1.0 / lb2 + 1.0 / slack;
}

double rho_w(const H1Constants& c, double K1, double K2)
{
    return std::max(c.k2 * K1 + c.k9 * c.k9, c.k3 * K2 + c.k10 * c.k10);
}

double rho_mid(const H1Constants& c, double lb1, double K3) { return c.k11_sq + c.k12_sq + (c.k4 + c.k5) * K3 / lb1; }

double rho_from(const H1Constants& c, double lb1, double lb2, double K1, double K2, double K3, double K4)
{
    const double u = rho_u(c, lb2, K4);
    if (!(lb1 > 0) || std::isinf(u)) return std::numeric_limits<double>::infinity();
    return u * rho_mid(c, lb1, K3) * rho_w(c, K1, K2);
}

}  // namespace

GlobalCertificate evaluate_certificate(const H1Constants& c, CertificateVariant variant, double lambda, double K1,
                                       double K2, double K3, double K4)
{
    GlobalCertificate g;
    g.constants = c;
    g.variant = variant;
    g.lambda = lambda;
    g.K1 = K1;
    g.K2 = K2;
    g.K3 = K3;
    g.K4 = K4;
    const double k1 = variant == CertificateVariant::NormBound ? c.k1 : c.k1_hat;
    g.lambda_bar1 = lambda_bar1(c, k1, lambda, K1, K2);
    g.lambda_bar2 = lambda_bar2(c, lambda, K3, K4);
    g.rho_cert = rho_from(c, g.lambda_bar1, g.lambda_bar2, K1, K2, K3, K4);
    g.feasible = std::isfinite(g.rho_cert);
    g.pass = g.rho_cert < 1.0;
    return g;
}

CertificateGrid CertificateGrid::standard()
{
    CertificateGrid g;
    for (int i = 0; i <= 200; ++i) g.lambdas.push_back(-50.0 + 0.5 * i);
    for (int i = 0; i < 24; ++i) g.ks.push_back(std::pow(10.0, -3.0 + 6.0 * i / 23.0));
    return g;
}

long CertificateGrid::size() const
{
    const long k = static_cast<long>(ks.size());
    return static_cast<long>(lambdas.size()) * k * k * k * k;
}

GlobalCertificate search_certificate(const H1Constants& c, CertificateVariant variant, const CertificateGrid& grid)
{
    const int nl = static_cast<int>(grid.lambdas.size());
    const long nk = static_cast<long>(grid.ks.size());
    const long per = nk * nk * nk * nk;
    std::vector<double> best(nl, std::numeric_limits<double>::infinity());
    std::vector<long> where(nl, -1);
    const double k1 = variant == CertificateVariant::NormBound ? c.k1 : c.k1_hat;
#pragma omp parallel for schedule(dynamic)
    for (int l = 0; l < nl; ++l) {
        const double lam = grid.lambdas[l];
        std::vector<double> u(nk * nk);
        for (long a = 0; a < nk; ++a)
            for (long b = 0; b < nk; ++b) u[a * nk + b] = rho_u(c, lambda_bar2(c, lam, grid.ks[a], grid.ks[b]), grid.ks[b]);
        for (long i12 = 0; i12 < nk * nk; ++i12) {
            const double K1 = grid.ks[i12 / nk], K2 = grid.ks[i12 % nk];
            const double lb1 = lambda_bar1(c, k1, lam, K1, K2);
            if (!(lb1 > 0)) continue;
            const double w = rho_w(c, K1, K2);
            for (long i3 = 0; i3 < nk; ++i3) {
                const double mid = rho_mid(c, lb1, grid.ks[i3]);
                for (long i4 = 0; i4 < nk; ++i4) {
                    const double r = u[i3 * nk + i4] * mid * w;
                    if (r < best[l]) {
                        best[l] = r;
                        where[l] = l * per + (i12 * nk + i3) * nk + i4;
                    }
                }
            }
        }
    }
    long idx = -1;
    double rho = std::numeric_limits<double>::infinity();
    for (int l = 0; l < nl; ++l)
        if (where[l] >= 0 && best[l] < rho) {
            rho = best[l];
            idx = where[l];
        }
    if (idx < 0) {
        // Nothing feasible: report the grid origin as the best attempt.
        auto g = evaluate_certificate(c, variant, grid.lambdas[0], grid.ks[0], grid.ks[0], grid.ks[0], grid.ks[0]);
        g.grid_index = 0;
        return g;
    }
    const long l = idx / per, q = idx % per;
    auto g = evaluate_certificate(c, variant, grid.lambdas[l], grid.ks[q / (nk * nk * nk)],
                                  grid.ks[q / (nk * nk) % nk], grid.ks[q / nk % nk], grid.ks[q % nk]);
    g.grid_index = idx;
    return g;
}

SpectralCondition spectral_condition(const StackedSystem& s)
{
    SpectralCondition sc;
    const double nc = fro(s.C), nh = fro(s.H), nf2 = fro(s.F2_Pi);
    const double common = -nc * nc - 4 * (nc + nh) * (nc + nh) - 4 * nf2 * nf2;
    sc.lhs = 4 * s.lambda_star;
    sc.rhs_norm = -2 * fro(s.F1_Pi) + common;
    sc.rhs_eigen = -2 * s.lambda_star_F1 + common;
    sc.norm = sc.lhs < sc.rhs_norm;
    sc.eigen = sc.lhs < sc.rhs_eigen;
    return sc;
}

namespace {

GlobalReport global_from(const std::vector<StackedSystem>& snaps)
{
    GlobalReport r;
    r.spectral = spectral_condition(snaps.front());
    for (std::size_t i = 1; i < snaps.size(); ++i) {
        const auto sc = spectral_condition(snaps[i]);
        r.spectral.lhs = std::max(r.spectral.lhs, sc.lhs);
        r.spectral.rhs_norm = std::min(r.spectral.rhs_norm, sc.rhs_norm);
        r.spectral.rhs_eigen = std::min(r.spectral.rhs_eigen, sc.rhs_eigen);
        r.spectral.norm = r.spectral.norm && sc.norm;
        r.spectral.eigen = r.spectral.eigen && sc.eigen;
    }
    const H1Constants c = operator_constants(snaps);
    r.norm = search_certificate(c, CertificateVariant::NormBound);
    r.eigen = search_certificate(c, CertificateVariant::EigenBound);
    return r;
}

}  // namespace

GlobalReport check_global(const StackedSystem& sys) { return global_from({sys}); }

GlobalReport check_global(const ModelSpec& spec) { return global_from(build_stacked_all(spec)); }

double local_factor(const LocalBound& b, double T)
{
    const double e = std::exp(b.C_eps * T);
    const double d = b.D2 + b.eps;
    return e * (T + 1.0) * (b.M0 * e * d + b.eps + T * e * d);
}

LocalBound local_horizon_bound(const ModelSpec& spec, double eps)
{
    const A4Report a4 = check_A4(spec);
    if (!a4.pass) throw PreconditionError("small-horizon condition fails: M0 |D|^2 = " + std::to_string(a4.product));
    LocalBound b;
    b.eps = eps;
    b.M0 = a4.M0;
    b.D2 = a4.Dmax * a4.Dmax;
    if (!(eps > 0) || b.M0 * (b.D2 + eps) + eps >= 1.0)
        throw PreconditionError("eps must be positive with M0 (|D|^2 + eps) + eps < 1");

    const auto& M = spec.major;
    const auto& m = spec.minor;
    auto fwd = [&](double a, double bb, double f1, double d, double c, double f2, double h) {
        return 2 * a + 2 * bb * bb / eps + 2 * f1 + 3 * (1 + 2 * d * d / eps) * (c * c + f2 * f2 + h * h);
    };
    auto bwd = [&](double a, double c, double q, double w) { return 2 * a * a / eps + 2 * c * c / eps + q * q * w; };
    double cf = fwd(worst(M.A), worst(M.B), worst(M.F1), worst(M.D), worst(M.C), worst(M.F2), 0.0);
    double cb = bwd(worst(M.A), worst(M.C), fro(M.Q), 1 + M.rho * M.rho);
    const double wk = 1 + m.rho * m.rho + (1 - m.rho) * (1 - m.rho);
    for (const auto& ty : spec.types) {
        cf += fwd(worst(ty.A), worst(m.B), worst(m.F1), worst(ty.D), worst(m.C), worst(m.F2), worst(m.H));
        cb += bwd(worst(ty.A), worst(m.C), fro(m.Q), wk);
    }
    cb += 2.0 * (spec.K() + 1);
    b.C_eps = cf + cb;

    double T = 1.0;
    for (int j = 0; j <= 60; ++j, T *= 0.5) {
        b.factor = local_factor(b, T);
        if (b.factor < 1.0) {
            b.T = T;
            return b;
        }
    }
    b.T = 0.0;
    return b;
}

PicardReport empirical_contraction(const ModelSpec& spec, std::shared_ptr<const NoiseEnsemble> ens,
                                   const SolverOptions& opt)
{
    return picard_solve(spec, std::move(ens), opt).report;
}

}  // namespace mfg
