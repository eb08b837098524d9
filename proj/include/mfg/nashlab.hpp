#pragma once

#include "mfg/model.hpp"
#include "mfg/solver.hpp"

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace mfg {

/// Control used by one agent in place of its decentralized strategy.
///
/// Shift plays P(u_bar + shift); Custom receives (node, u_bar, own realized state)
/// and must return a point of the agent's constraint set.
struct Deviation {
    enum class Kind { None, Self, Zero, Shift, Custom };
    Kind kind = Kind::None;
    int agent = 0;  // 0 is the major agent, 1..N the minors
    Vector shift;
    std::function<Vector(int, const Vector&, const Vector&)> custom;
    std::string label;

    static Deviation self(int agent);
    static Deviation zero(int agent);
    static Deviation shifted(int agent, Vector shift, std::string label = "");
};

/// One replication of the N-agent system under the decentralized strategies.
///
/// Trajectory arrays are (J + 1) x n per agent; minors are stored agent-major.
/// Limiting quantities come from the same noise through the decoupling field.
struct RealizedRun {
    int N = 0, n = 0, m = 0, J = 0;
    int replication = 0, path = 0;
    PopulationAssignment assignment;
    std::vector<double> x0, x, average;
    std::vector<double> xbar0, xbar, phi;
    double cost0 = 0.0, lim0 = 0.0;  // pathwise realized and limiting costs
    std::vector<double> cost, lim;

    const double* minor_at(int i, int j) const { return &x[(static_cast<std::size_t>(i) * (J + 1) + j) * n]; }
};

/// Euler scheme for the coupled system; agent noise is addressed by (seed, replication, N, agent, node)
/// and the common noise is path replication mod P of the solution's ensemble.
RealizedRun simulate_realized(const CCSolution& sol, int N, int replication, std::uint64_t seed,
                              const Deviation& dev = {});

/// Log-log least squares y = c N^slope.
struct RateFit {
    double slope = 0.0, intercept = 0.0, r2 = 0.0;
    double slope_se = 0.0;
    double ci_low = 0.0, ci_high = 0.0;  // 95% interval on the slope
    int points = 0;
};

RateFit rate_fit(const std::vector<double>& xs, const std::vector<double>& ys);

struct NashOptions {
    std::vector<int> Ns{8, 16, 32, 64, 128};
    int replications = 64;
    std::uint64_t seed = 1;
};

/// Replication means and standard errors for one population size.
struct ConvergenceRow {
    int N = 0;
    double state_gap = 0, state_gap_se = 0;  // E sup_t |x^(N) - Phi|^2
    double agent_gap = 0, agent_gap_se = 0;  // E sup_t |x_i - xbar_i|^2 over all minors
    double second_moment = 0;                // E sup_t |x_i|^2 over all minors
    double cost_gap0 = 0, cost_gap0_se = 0;  // E |J_0 realized - J_0 limiting|, pathwise
    std::vector<double> cost_gap, cost_gap_se;  // per type, over the type's agents
    double cost_mean0 = 0, lim_mean0 = 0;
    std::vector<double> cost_mean, lim_mean;
};

struct NashReport {
    std::vector<ConvergenceRow> rows;
    std::optional<RateFit> state_fit, agent_fit, moment_fit, cost_fit0;
    std::vector<RateFit> cost_fit;  // per type, empty without a fit
};

ConvergenceRow convergence_row(const CCSolution& sol, int N, int replications, std::uint64_t seed);

/// Rows for every N; fits need at least four N-values and are omitted otherwise.
NashReport convergence_study(const CCSolution& sol, const NashOptions& opt);

/// E sup |x^(N) - Phi|^2 per N; refuses fewer than four N-values.
std::vector<double> state_average_gap(const NashReport& report);

/// Pathwise cost gaps per N: column 0 the major agent, column 1 + k type k.
std::vector<std::vector<double>> cost_gap_study(const NashReport& report);

/// Improvements J(u_bar) - J(u) over paired replications. The excess subtracts the
/// improvement of the same deviation in the infinite-population system on the same
/// noise, which removes the part owed to discretization of the limiting solution.
struct CandidateResult {
    std::string label;
    double improvement = 0.0, se = 0.0;
    double excess = 0.0, excess_se = 0.0;
};

struct PerturbationReport {
    int N = 0, agent = 0;
    std::vector<CandidateResult> candidates;
    double best = 0.0, best_excess = 0.0;
    double eps_hat = 0.0;     // max(0, best)
    double eps_excess = 0.0;  // max(0, best_excess)
};

/// Paired-noise improvements of each candidate for agent 0.
PerturbationReport major_perturbation(const CCSolution& sol, int N, const std::vector<Deviation>& candidates,
                                      int replications, std::uint64_t seed);

/// Same for minor agent i in 1..N.
PerturbationReport minor_perturbation(const CCSolution& sol, int N, int agent,
                                      const std::vector<Deviation>& candidates, int replications,
                                      std::uint64_t seed);

/// Constant-shift deviation improved by projected Newton steps on paired replications,
/// with the shift kept in [-bound, bound]^m.
Deviation best_response_shift(const CCSolution& sol, int N, int agent, int replications, std::uint64_t seed,
                              int iterations = 6, double bound = 1.0);

/// Self, zero, projected shifts of +-0.1 and +-0.3 along the ones vector, and the best-response shift.
std::vector<Deviation> deviation_family(const CCSolution& sol, int N, int agent, int replications,
                                        std::uint64_t seed);

/// Straightforward serial implementation kept to cross-check the realized kernel.
namespace reference {
RealizedRun simulate_realized(const CCSolution& sol, int N, int replication, std::uint64_t seed);
}

}  // namespace mfg
