#pragma once

#include "mfg/model.hpp"
#include "mfg/paths.hpp"
#include "mfg/regression.hpp"

#include <cstddef>
#include <memory>
#include <string>
#include <vector>

namespace mfg {

/// How the backward driver treats the adjoint unknowns.
///
/// Frozen: the driver uses the previous iterate's (beta, gamma), which is the
/// contraction map of the small-horizon existence argument.
/// Coupled: the backward equation is solved in its own unknowns given the
/// forward states, which is the map used by the discounting argument and
/// stays contractive on long horizons.
enum class DriverMode { Frozen, Coupled };

std::string to_string(DriverMode mode);
DriverMode driver_from_string(const std::string& name);

struct SolverOptions {
    double tol = 1e-8;
    int max_iter = 50;
    DriverMode driver = DriverMode::Coupled;
    /// Stop as diverged once a delta exceeds this multiple of max(1, first delta).
    double blowup = 1e10;
    std::size_t memory_cap = std::size_t(4) << 30;
};

/// Discretized (alpha, beta, gamma) surfaces with conditional means and controls.
///
/// Major arrays are indexed (j*P + p)*n, minor arrays (((j*P + p)*K + k)*M + i)*n,
/// means ((j*P + p)*K + k)*n, phi (j*P + p)*n. Controls use m in place of n.
struct CCIterate {
    int n = 0, m = 0, K = 0, P = 0, M = 0, J = 0;
    std::vector<double> alpha0, beta0, gamma0, u0;
    std::vector<double> alpha, beta, gamma, gamma_k0, u;
    std::vector<double> mean, phi;

    static CCIterate zeros(const ModelSpec& spec, const NoiseEnsemble& ens);
    static std::size_t bytes(const ModelSpec& spec, int P, int M, int J);

    std::size_t major(int j, int p) const { return (static_cast<std::size_t>(j) * P + p) * n; }
    std::size_t major_u(int j, int p) const { return (static_cast<std::size_t>(j) * P + p) * m; }
    std::size_t minor(int j, int p, int k, int i) const
    {
        return (((static_cast<std::size_t>(j) * P + p) * K + k) * M + i) * n;
    }
    std::size_t minor_u(int j, int p, int k, int i) const
    {
        return (((static_cast<std::size_t>(j) * P + p) * K + k) * M + i) * m;
    }
    std::size_t mean_at(int j, int p, int k) const { return ((static_cast<std::size_t>(j) * P + p) * K + k) * n; }
};

/// Linear maps from the regression basis to (beta, gamma) at every node.
///
/// Major basis: (alpha0, m_1..m_K); minor basis: (x, alpha0, m_1..m_K).
/// Outputs are (beta | gamma), 2n columns.
struct DecouplingField {
    std::vector<LinearFit> major;  // J + 1
    std::vector<LinearFit> minor;  // (J + 1) * K, index j*K + k
};

struct PicardReport {
    int iterations = 0;
    bool converged = false;
    bool diverged = false;
    DriverMode driver = DriverMode::Coupled;
    std::vector<double> deltas;
    std::vector<double> ratios;
    double final_residual = 0.0;
    long regression_warnings = 0;
    std::string message;
};

struct CCSolution {
    ModelSpec spec;
    std::shared_ptr<const NoiseEnsemble> ensemble;
    CCIterate it;
    DecouplingField field;
    PicardReport report;
};

/// Euler step of the forward system with controls from the current (beta, gamma).
/// Throws DivergenceError at the first non-finite state in (j, p, k, i) order.
void forward_pass(const ModelSpec& spec, const NoiseEnsemble& ens, CCIterate& it);

struct BackwardStats {
    double delta = 0.0;  // discrete norm of the (beta, gamma, gamma_k0) update
    long warnings = 0;   // rank-deficient regressions
};

/// Regression-based backward recursion from the terminal conditions, in place.
BackwardStats backward_pass(const ModelSpec& spec, const NoiseEnsemble& ens, CCIterate& it, DriverMode mode);

/// Regress the current (beta, gamma) on the basis at every node.
DecouplingField fit_field(const ModelSpec& spec, const NoiseEnsemble& ens, const CCIterate& it);

/// Picard iteration from the zero adjoint; never throws on divergence or
/// non-convergence, which are reported instead.
CCSolution picard_solve(const ModelSpec& spec, std::shared_ptr<const NoiseEnsemble> ens, const SolverOptions& opt);

/// Straightforward serial implementations kept to cross-check the parallel kernels.
namespace reference {
void forward_pass(const ModelSpec& spec, const NoiseEnsemble& ens, CCIterate& it);
BackwardStats backward_pass(const ModelSpec& spec, const NoiseEnsemble& ens, CCIterate& it, DriverMode mode);
}  // namespace reference

/// Trajectories of one representative agent under the decentralized strategy.
struct AgentPath {
    int n = 0, m = 0, J = 0;
    std::vector<double> x, p, q, u;  // (J + 1) x n, control (J + 1) x m
};

/// Type-k agent driven by its own increments dW (length J) on common path `path`.
AgentPath decentralized_strategy(const CCSolution& sol, int type, const std::vector<double>& dW, int path);

/// Limiting major trajectory on common path `path`, rebuilt from its decoupling field.
AgentPath major_strategy(const CCSolution& sol, int path);

struct HamiltonianResidual {
    double max_violation = 0.0;  // max of <dH/du at u*, u - u*> over samples
    double scale = 1.0;          // 1 + max |B'beta + D'gamma| over samples
    int samples = 0;
};

/// First-order optimality check of the emitted controls at sampled nodes.
HamiltonianResidual hamiltonian_residual(const CCSolution& sol, int samples, std::uint64_t seed = 17);

}  // namespace mfg
