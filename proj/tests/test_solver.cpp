#include "mfg/solver.hpp"

#include "support.hpp"

#include <gtest/gtest.h>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <random>

using namespace mfg;
using namespace mfg::testing;

namespace {

std::shared_ptr<const NoiseEnsemble> ensemble(const ModelSpec& s, int J, int P, int M, std::uint64_t seed = 7)
{
    return std::make_shared<const NoiseEnsemble>(sample_ensemble(TimeGrid(s.T, J), P, M, s.K(), seed));
}

CCSolution solve(const ModelSpec& s, int J, int P, int M, SolverOptions opt = {}, std::uint64_t seed = 7)
{
    return picard_solve(s, ensemble(s, J, P, M, seed), opt);
}

double max_abs_diff(const std::vector<double>& a, const std::vector<double>& b)
{
    double d = 0;
    for (std::size_t i = 0; i < a.size(); ++i) d = std::max(d, std::abs(a[i] - b[i]));
    return d;
}

}  // namespace

TEST(Forward, ZeroCoefficientsKeepInitialStates)
{
    const ModelSpec s = scalar_spec(2);
    const auto ens = ensemble(s, 10, 3, 4);
    CCIterate it = CCIterate::zeros(s, *ens);
    forward_pass(s, *ens, it);
    for (double v : it.alpha0) EXPECT_EQ(v, 1.0);
    for (double v : it.alpha) EXPECT_EQ(v, 1.0);
}

TEST(Forward, LinearGrowthMatchesCompoundFactor)
{
    ModelSpec s = scalar_spec(1);
    s.types[0].A = s1(1.0);
    const auto ens = ensemble(s, 100, 2, 3);
    CCIterate it = CCIterate::zeros(s, *ens);
    forward_pass(s, *ens, it);
    const double expect = std::pow(1.0 + 0.01, 100);
    for (int p = 0; p < 2; ++p)
        for (int i = 0; i < 3; ++i) EXPECT_NEAR(it.alpha[it.minor(100, p, 0, i)], expect, 1e-12);
}

TEST(Forward, PureDriftIntegratesLinearly)
{
    ModelSpec s = scalar_spec(1);
    s.major.b = v1(1.0);
    const auto ens = ensemble(s, 20, 2, 2);
    CCIterate it = CCIterate::zeros(s, *ens);
    forward_pass(s, *ens, it);
    for (int j = 0; j <= 20; ++j) EXPECT_NEAR(it.alpha0[it.major(j, 1)], 1.0 + j * 0.05, 1e-12);
}

TEST(Forward, NonFiniteStateNamesFirstLocation)
{
    ModelSpec s = scalar_spec(1);
    s.types[0].A = s1(1e300);
    const auto ens = ensemble(s, 5, 2, 2);
    CCIterate it = CCIterate::zeros(s, *ens);
    try {
        forward_pass(s, *ens, it);
        FAIL() << "expected divergence";
    } catch (const DivergenceError& e) {
        EXPECT_EQ(e.path, 0);
        EXPECT_EQ(e.type, 0);
        EXPECT_EQ(e.particle, 0);
    }
}

TEST(Backward, ConstantTerminalIsMartingale)
{
    ModelSpec s = scalar_spec(1);
    s.major.G = s1(1.0);
    s.major.sigma = v1(0.5);
    s.minor.sigma = v1(0.5);
    const auto ens = ensemble(s, 20, 64, 32);
    CCIterate it = CCIterate::zeros(s, *ens);
    for (int p = 0; p < it.P; ++p) it.alpha0[it.major(20, p)] = 2.0;
    backward_pass(s, *ens, it, DriverMode::Coupled);
    for (int j = 0; j <= 20; ++j)
        for (int p = 0; p < it.P; ++p) {
            EXPECT_NEAR(it.beta0[it.major(j, p)], -2.0, 1e-12);
            EXPECT_NEAR(it.gamma0[it.major(j, p)], 0.0, 1e-12);
        }
}

TEST(Backward, LinearDriverMatchesProductOracle)
{
    ModelSpec s = scalar_spec(1);
    s.major.A = s1(1.0);
    s.major.G = s1(1.0);
    const int J = 100;
    const auto ens = ensemble(s, J, 4, 2);
    CCIterate it = CCIterate::zeros(s, *ens);
    for (int p = 0; p < it.P; ++p) it.alpha0[it.major(J, p)] = -1.0;
    backward_pass(s, *ens, it, DriverMode::Coupled);
    const double expect = std::pow(1.0 + 1.0 / J, J);
    for (int p = 0; p < it.P; ++p) EXPECT_NEAR(it.beta0[it.major(0, p)], expect, 1e-12);
}

TEST(Backward, BrownianEndpointHasUnitIntegrand)
{
    ModelSpec s = scalar_spec(1);
    s.major.x0 = v1(0.0);
    s.major.sigma = v1(1.0);
    s.major.G = s1(1.0);
    const int J = 20;
    const auto ens = ensemble(s, J, 4096, 1);
    CCIterate it = CCIterate::zeros(s, *ens);
    forward_pass(s, *ens, it);
    backward_pass(s, *ens, it, DriverMode::Coupled);
    for (int j = 0; j < J; ++j) {
        double mean = 0;
        for (int p = 0; p < it.P; ++p) mean += it.gamma0[it.major(j, p)] / it.P;
        EXPECT_NEAR(mean, -1.0, 0.1) << "node " << j;
        for (int p = 0; p < it.P; p += 97)
            EXPECT_NEAR(it.beta0[it.major(j, p)], -it.alpha0[it.major(j, p)], 0.1);
    }
}

TEST(Backward, TerminalIdentitiesAreExact)
{
    const ModelSpec s = coupled_spec();
    const auto ens = ensemble(s, 10, 8, 16);
    CCIterate it = CCIterate::zeros(s, *ens);
    forward_pass(s, *ens, it);
    backward_pass(s, *ens, it, DriverMode::Frozen);
    const int J = 10, n = 2;
    for (int p = 0; p < it.P; ++p) {
        const Eigen::Map<const Vector> a0(&it.alpha0[it.major(J, p)], n), phi(&it.phi[it.major(J, p)], n);
        const Vector b0 = -s.major.G * (a0 - s.major.rho * phi);
        for (int c = 0; c < n; ++c) EXPECT_NEAR(it.beta0[it.major(J, p) + c], b0[c], 1e-12);
        for (int k = 0; k < 2; ++k)
            for (int i = 0; i < it.M; ++i) {
                const Eigen::Map<const Vector> a(&it.alpha[it.minor(J, p, k, i)], n);
                const Vector b = -s.minor.G * (a - s.minor.rho * phi - (1 - s.minor.rho) * a0);
                for (int c = 0; c < n; ++c) EXPECT_NEAR(it.beta[it.minor(J, p, k, i) + c], b[c], 1e-12);
            }
    }
}

TEST(Kernels, ParallelMatchesReference)
{
    const ModelSpec s = coupled_spec();
    const auto ens = ensemble(s, 12, 24, 16);
    for (DriverMode mode : {DriverMode::Frozen, DriverMode::Coupled}) {
        CCIterate a = CCIterate::zeros(s, *ens), b = a;
        for (int iter = 0; iter < 3; ++iter) {
            forward_pass(s, *ens, a);
            reference::forward_pass(s, *ens, b);
            EXPECT_LT(max_abs_diff(a.alpha, b.alpha), 1e-9);
            EXPECT_LT(max_abs_diff(a.u0, b.u0), 1e-9);
            const auto da = backward_pass(s, *ens, a, mode);
            const auto db = reference::backward_pass(s, *ens, b, mode);
            EXPECT_NEAR(da.delta, db.delta, 1e-9 * (1 + db.delta));
            EXPECT_LT(max_abs_diff(a.beta, b.beta), 1e-9);
            EXPECT_LT(max_abs_diff(a.gamma, b.gamma), 1e-8);
            EXPECT_LT(max_abs_diff(a.gamma_k0, b.gamma_k0), 1e-8);
            EXPECT_LT(max_abs_diff(a.gamma0, b.gamma0), 1e-8);
        }
    }
}

TEST(Kernels, ThreadCountDoesNotChangeBits)
{
    const ModelSpec s = coupled_spec();
    const int saved = omp_get_max_threads();
    omp_set_num_threads(1);
    const CCSolution a = solve(s, 10, 12, 20);
    omp_set_num_threads(3);
    const CCSolution b = solve(s, 10, 12, 20);
    omp_set_num_threads(saved);
    EXPECT_EQ(a.report.deltas, b.report.deltas);
    EXPECT_EQ(a.it.u, b.it.u);
    EXPECT_EQ(a.it.beta0, b.it.beta0);
}

TEST(Picard, TooFewPathsForBasisIsRejected)
{
    EXPECT_THROW(solve(coupled_spec(), 10, 7, 8), PreconditionError);
}

TEST(Picard, ZeroCostConvergesAtOnce)
{
    ModelSpec s = scalar_spec(2);
    s.major.sigma = v1(0.3);
    s.minor.sigma = v1(0.3);
    const CCSolution sol = solve(s, 10, 8, 8);
    EXPECT_TRUE(sol.report.converged);
    EXPECT_LE(sol.report.iterations, 2);
    for (double v : sol.it.u) EXPECT_EQ(v, 0.0);
    for (double v : sol.it.beta) EXPECT_EQ(v, 0.0);
}

TEST(Picard, ReportInvariants)
{
    SolverOptions opt;
    opt.max_iter = 3;
    opt.tol = 0.0;
    const CCSolution sol = solve(coupled_spec(), 10, 12, 8, opt);
    const auto& r = sol.report;
    EXPECT_FALSE(r.converged);
    EXPECT_EQ(r.iterations, 3);
    EXPECT_EQ(r.deltas.size(), 3u);
    EXPECT_EQ(r.ratios.size(), 2u);
    for (double d : r.deltas) EXPECT_GE(d, 0.0);
    EXPECT_EQ(r.final_residual, r.deltas.back());
    EXPECT_EQ(r.message, "maximum iterations reached");
}

TEST(Picard, LargeTerminalWeightIsReportedNotThrown)
{
    SolverOptions opt;
    opt.driver = DriverMode::Frozen;
    opt.max_iter = 40;
    CCSolution sol;
    EXPECT_NO_THROW(sol = solve(coupled_spec(5.0, 200.0), 20, 12, 8, opt));
    EXPECT_FALSE(sol.report.converged);
}

TEST(Picard, RiccatiFeedback)
{
    const ModelSpec s = riccati_spec();
    const int J = 100;
    const CCSolution sol = solve(s, J, 64, 128);
    ASSERT_TRUE(sol.report.converged) << sol.report.message;
    const auto g = riccati_gains(-1.0, -1.0, 1.0, J);
    const auto err = riccati_error(sol, g);
    EXPECT_LT(err.major, 0.02);
    EXPECT_LT(err.minor, 0.02);
}

TEST(Picard, UnconstrainedControlIsLinearInAdjoint)
{
    const CCSolution sol = solve(riccati_spec(), 20, 8, 16);
    const auto& it = sol.it;
    for (int j = 0; j <= it.J; ++j)
        for (int p = 0; p < it.P; ++p) {
            EXPECT_EQ(it.u0[it.major_u(j, p)], it.beta0[it.major(j, p)]);
            for (int i = 0; i < it.M; ++i)
                EXPECT_EQ(it.u[it.minor_u(j, p, 0, i)], it.beta[it.minor(j, p, 0, i)]);
        }
}

TEST(Picard, ControlsAreAdmissible)
{
    const ModelSpec s = coupled_spec();
    const CCSolution sol = solve(s, 20, 12, 32);
    const auto& it = sol.it;
    for (int j = 0; j <= it.J; ++j)
        for (int p = 0; p < it.P; ++p) {
            EXPECT_TRUE(s.major.gamma.contains(Eigen::Map<const Vector>(&it.u0[it.major_u(j, p)], 2)));
            for (int k = 0; k < 2; ++k)
                for (int i = 0; i < it.M; ++i)
                    EXPECT_TRUE(s.types[k].gamma.contains(Eigen::Map<const Vector>(&it.u[it.minor_u(j, p, k, i)], 2)));
        }
}

TEST(Hamiltonian, UnconstrainedResidualVanishes)
{
    const CCSolution sol = solve(riccati_spec(), 20, 8, 16);
    const auto h = hamiltonian_residual(sol, 10000);
    EXPECT_EQ(h.samples, 10000);
    EXPECT_LE(h.max_violation, 1e-6 * h.scale);
}

TEST(Hamiltonian, ConstrainedResidualSatisfiesInequality)
{
    const CCSolution sol = solve(coupled_spec(), 20, 12, 16);
    const auto h = hamiltonian_residual(sol, 10000);
    EXPECT_LE(h.max_violation, 1e-6 * h.scale);
}

TEST(Strategy, MajorFieldReproducesSolvedPath)
{
    const CCSolution sol = solve(riccati_spec(), 20, 16, 32);
    const auto& it = sol.it;
    for (int p = 0; p < it.P; p += 5) {
        const AgentPath a = major_strategy(sol, p);
        for (int j = 0; j <= it.J; ++j) {
            EXPECT_NEAR(a.x[j], it.alpha0[it.major(j, p)], 1e-8);
            EXPECT_NEAR(a.p[j], it.beta0[it.major(j, p)], 1e-8);
            // The integrand at T repeats the last interval's value.
            if (j < it.J) EXPECT_NEAR(a.q[j], it.gamma0[it.major(j, p)], 1e-8) << "node " << j;
        }
    }
}

TEST(Strategy, AgentOnParticleNoiseReproducesParticle)
{
    const CCSolution sol = solve(riccati_spec(), 20, 8, 32);
    const auto& it = sol.it;
    std::vector<double> dW(it.J);
    for (int j = 0; j < it.J; ++j) dW[j] = sol.ensemble->particle(3, 0, 5, j);
    const AgentPath a = decentralized_strategy(sol, 0, dW, 3);
    for (int j = 0; j <= it.J; ++j) {
        EXPECT_NEAR(a.x[j], it.alpha[it.minor(j, 3, 0, 5)], 1e-8);
        EXPECT_NEAR(a.u[j], it.u[it.minor_u(j, 3, 0, 5)], 1e-8);
    }
}

TEST(Strategy, FreshAgentsShareParticleLaw)
{
    const CCSolution sol = solve(riccati_spec(0.0, 0.5), 20, 4, 4096);
    const auto& it = sol.it;
    std::vector<double> agents, particles;
    for (int i = 0; i < it.M; ++i) {
        std::vector<double> dW(it.J);
        for (int j = 0; j < it.J; ++j)
            dW[j] = std::sqrt(sol.ensemble->grid.dt) * normal_at(99, StreamRole::Agent, j, i, 0, 0);
        agents.push_back(decentralized_strategy(sol, 0, dW, 0).x[it.J]);
        particles.push_back(it.alpha[it.minor(it.J, 0, 0, i)]);
    }
    std::sort(agents.begin(), agents.end());
    std::sort(particles.begin(), particles.end());
    // Two-sample Kolmogorov-Smirnov statistic against the p = 0.01 critical value.
    double d = 0;
    std::size_t a = 0, b = 0;
    while (a < agents.size() && b < particles.size()) {
        const double x = std::min(agents[a], particles[b]);
        while (a < agents.size() && agents[a] <= x) ++a;
        while (b < particles.size() && particles[b] <= x) ++b;
        d = std::max(d, std::abs(double(a) / agents.size() - double(b) / particles.size()));
    }
    const double crit = 1.628 * std::sqrt(2.0 / it.M);
    EXPECT_LT(d, crit);
}

TEST(Strategy, ZeroCostAgentUsesProjectedZero)
{
    ModelSpec s = scalar_spec(1);
    s.minor.sigma = v1(0.2);
    const CCSolution sol = solve(s, 10, 4, 4);
    const AgentPath a = decentralized_strategy(sol, 0, std::vector<double>(10, 0.1), 1);
    for (double u : a.u) EXPECT_EQ(u, 0.0);
}
