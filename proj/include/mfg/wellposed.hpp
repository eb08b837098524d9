#pragma once

#include "mfg/model.hpp"
#include "mfg/solver.hpp"

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace mfg {

/// Small-horizon coupling condition M0 |D|^2 < 1.
struct A4Report {
    double M0 = 0.0;    // max{|G0|^2 (1 + rho0^2), |G|^2 (1 + rho^2 + (1 - rho)^2)}
    double Dmax = 0.0;  // max over the major and every type of |D_k|, worst segment
    double product = 0.0;
    bool pass = false;
};

A4Report check_A4(const ModelSpec& spec);

enum class CertificateVariant { NormBound, EigenBound };

std::string to_string(CertificateVariant v);

/// The closed-form spectral inequality 4 lambda* < -2 f1 - |C|^2 - 4(|C| + |H|)^2 - 4|F2|^2,
/// with f1 = |F1^Pi| (norm bound) or the top eigenvalue of its symmetric part (eigenvalue bound).
struct SpectralCondition {
    double lhs = 0.0;
    double rhs_norm = 0.0;
    double rhs_eigen = 0.0;
    bool norm = false;
    bool eigen = false;
};

/// Contraction factor of the discounted fixed-point map at one parameter choice.
struct GlobalCertificate {
    H1Constants constants;
    CertificateVariant variant = CertificateVariant::NormBound;
    double lambda = 0.0, K1 = 0.0, K2 = 0.0, K3 = 0.0, K4 = 0.0;
    double lambda_bar1 = 0.0, lambda_bar2 = 0.0;
    double rho_cert = 0.0;  // +inf where the positivity constraints fail
    bool feasible = false;  // lambda_bar1 > 0, lambda_bar2 > 0, 1 - k6 K4 > 0
    bool pass = false;      // feasible and rho_cert < 1
    long grid_index = -1;
};

struct GlobalReport {
    SpectralCondition spectral;
    GlobalCertificate norm;  // best grid point with k1
    GlobalCertificate eigen;   // best grid point with k1_hat
    const GlobalCertificate& best() const;
    bool pass() const { return best().pass; }
};

/// Evaluates the certificate at one parameter point.
GlobalCertificate evaluate_certificate(const H1Constants& c, CertificateVariant variant, double lambda, double K1,
                                       double K2, double K3, double K4);

/// Search grid: lambda in [-50, 50] step 0.5; K1..K4 log-spaced, 24 points over [1e-3, 1e3].
struct CertificateGrid {
    std::vector<double> lambdas, ks;
    static CertificateGrid standard();
    long size() const;
};

/// Minimum of rho_cert over the grid; ties go to the lower grid index.
GlobalCertificate search_certificate(const H1Constants& c, CertificateVariant variant,
                                     const CertificateGrid& grid = CertificateGrid::standard());

SpectralCondition spectral_condition(const StackedSystem& sys);

GlobalReport check_global(const StackedSystem& sys);

/// Worst case over all coefficient segments of the spec.
GlobalReport check_global(const ModelSpec& spec);

/// Conservative small-horizon estimate from the local contraction argument.
///
/// With norms taken worst-case over segments and k = 0 the major agent:
///   C_fwd = sum_k [2|A_k| + 2|B_k|^2/eps + 2|F1_k| + 3(1 + 2|D_k|^2/eps)(|C_k|^2 + |F2_k|^2 + |H_k|^2)]
///   C_bwd = sum_k [2|A_k|^2/eps + 2|C_k|^2/eps + |Q_k|^2 w_k] + 2(K + 1)
/// where w_0 = 1 + rho0^2, w_k = 1 + rho^2 + (1 - rho)^2, H_0 = 0, and C_eps = C_fwd + C_bwd.
/// The factor is e^{C T}(T + 1)[M0 e^{C T}(|D|^2 + eps) + eps + T e^{C T}(|D|^2 + eps)].
struct LocalBound {
    double eps = 0.0;
    double C_eps = 0.0;
    double M0 = 0.0, D2 = 0.0;
    double T = 0.0;       // largest 2^-j, j >= 0, with factor < 1; 0 when none down to 2^-60
    double factor = 0.0;  // factor at the returned T (at 2^-60 when none)
};

double local_factor(const LocalBound& b, double T);

LocalBound local_horizon_bound(const ModelSpec& spec, double eps);

/// Runs the solver and returns its report, whose ratios are the observed contraction factors.
PicardReport empirical_contraction(const ModelSpec& spec, std::shared_ptr<const NoiseEnsemble> ens,
                                   const SolverOptions& opt);

}  // namespace mfg
