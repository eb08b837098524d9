#include "mfg/solver.hpp"

#include "strategy_impl.hpp"

#include <algorithm>
#include <random>

namespace mfg {

using CVec = Eigen::Map<const Vector>;

namespace detail {

void agent_path(const CCSolution& sol, const ModelTable& tab, int type, const double* dW, int path, AgentPath& out)
{
    const auto& it = sol.it;
    const int n = it.n, m = it.m, K = it.K, J = it.J;
    const double dt = sol.ensemble->grid.dt;
    out.n = n;
    out.m = m;
    out.J = J;
    out.x.assign(static_cast<std::size_t>(J + 1) * n, 0.0);
    out.p = out.q = out.x;
    out.u.assign(static_cast<std::size_t>(J + 1) * m, 0.0);
    double basis[kMaxDim * (2 + 64)], pq[2 * kMaxDim];
    SVec x = tab.x;
    for (int j = 0; j <= J; ++j) {
        const auto& nd = tab.nodes[j];
        const auto& ty = nd.types[type];
        const CVec a0(&it.alpha0[it.major(j, path)], n);
        const CVec phi(&it.phi[it.major(j, path)], n);
        std::copy(x.data(), x.data() + n, basis);
        std::copy(a0.data(), a0.data() + n, basis + n);
        std::copy_n(&it.mean[it.mean_at(j, path, 0)], K * n, basis + 2 * n);
        sol.field.minor[static_cast<std::size_t>(j) * K + type].predict(basis, pq);
        const CVec pb(pq, n), qb(pq + n, n);
        SVec u = ty.Kb * pb + ty.Kd * qb;
        tab.minor[type].apply(u);
        std::copy(x.data(), x.data() + n, out.x.begin() + static_cast<std::ptrdiff_t>(j) * n);
        std::copy(pq, pq + n, out.p.begin() + static_cast<std::ptrdiff_t>(j) * n);
        std::copy(pq + n, pq + 2 * n, out.q.begin() + static_cast<std::ptrdiff_t>(j) * n);
        std::copy(u.data(), u.data() + m, out.u.begin() + static_cast<std::ptrdiff_t>(j) * m);
        if (j == J) break;
        x = x + (ty.A * x + nd.B * u + nd.F1 * phi + nd.b) * dt +
            (nd.C * x + ty.D * u + nd.F2 * phi + nd.H * a0 + nd.s) * dW[j];
        if (!x.allFinite()) throw DivergenceError("non-finite limiting state", path, type, -1, j + 1);
    }
}

void major_path(const CCSolution& sol, const ModelTable& tab, int path, AgentPath& out)
{
    const auto& it = sol.it;
    const int n = it.n, m = it.m, K = it.K, J = it.J;
    const double dt = sol.ensemble->grid.dt;
    out.n = n;
    out.m = m;
    out.J = J;
    out.x.assign(static_cast<std::size_t>(J + 1) * n, 0.0);
    out.p = out.q = out.x;
    out.u.assign(static_cast<std::size_t>(J + 1) * m, 0.0);
    double basis[kMaxDim * (1 + 64)], pq[2 * kMaxDim];
    SVec x = tab.x0;
    for (int j = 0; j <= J; ++j) {
        const auto& nd = tab.nodes[j];
        const CVec phi(&it.phi[it.major(j, path)], n);
        std::copy(x.data(), x.data() + n, basis);
        std::copy_n(&it.mean[it.mean_at(j, path, 0)], K * n, basis + n);
        sol.field.major[j].predict(basis, pq);
        const CVec pb(pq, n), qb(pq + n, n);
        SVec u = nd.K0b * pb + nd.K0d * qb;
        tab.major.apply(u);
        std::copy(x.data(), x.data() + n, out.x.begin() + static_cast<std::ptrdiff_t>(j) * n);
        std::copy(pq, pq + n, out.p.begin() + static_cast<std::ptrdiff_t>(j) * n);
        std::copy(pq + n, pq + 2 * n, out.q.begin() + static_cast<std::ptrdiff_t>(j) * n);
        std::copy(u.data(), u.data() + m, out.u.begin() + static_cast<std::ptrdiff_t>(j) * m);
        if (j == J) break;
        x = x + (nd.A0 * x + nd.B0 * u + nd.F01 * phi + nd.b0) * dt +
            (nd.C0 * x + nd.D0 * u + nd.F02 * phi + nd.s0) * sol.ensemble->common(path, j);
        if (!x.allFinite()) throw DivergenceError("non-finite limiting state", path, -1, -1, j + 1);
    }
}

void check_solution(const CCSolution& sol, int path)
{
    if (path < 0 || path >= sol.it.P) throw PreconditionError("common path out of range");
    if (sol.field.major.empty() || sol.field.minor.empty())
        throw PreconditionError("solution carries no decoupling field");
    if (sol.it.K > 64) throw PreconditionError("at most 64 minor types supported by the strategy kernels");
}

}  // namespace detail

AgentPath decentralized_strategy(const CCSolution& sol, int type, const std::vector<double>& dW, int path)
{
    if (type < 0 || type >= sol.it.K) throw PreconditionError("agent type out of range");
    detail::check_solution(sol, path);
    if (static_cast<int>(dW.size()) != sol.it.J) throw StructuralError("agent noise must have one increment per step");
    const detail::ModelTable tab(sol.spec, sol.ensemble->grid);
    AgentPath out;
    detail::agent_path(sol, tab, type, dW.data(), path, out);
    return out;
}

AgentPath major_strategy(const CCSolution& sol, int path)
{
    detail::check_solution(sol, path);
    const detail::ModelTable tab(sol.spec, sol.ensemble->grid);
    AgentPath out;
    detail::major_path(sol, tab, path, out);
    return out;
}

HamiltonianResidual hamiltonian_residual(const CCSolution& sol, int samples, std::uint64_t seed)
{
    const auto& it = sol.it;
    const auto& spec = sol.spec;
    const int n = it.n, m = it.m, K = it.K;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> node(0, it.J), path(0, it.P - 1), part(0, it.M - 1);
    HamiltonianResidual res;
    res.max_violation = -std::numeric_limits<double>::infinity();
    double biggest = 0.0;
    for (int s = 0; s < samples; ++s) {
        const int role = s % (K + 1);
        const int j = node(rng), p = path(rng);
        const double t = sol.ensemble->grid.t(j);
        Vector grad, ustar;
        const Matrix* R;
        const ConstraintSet* gamma;
        if (role == 0) {
            const CVec b(&it.beta0[it.major(j, p)], n), g(&it.gamma0[it.major(j, p)], n);
            grad = spec.major.B.at(t).transpose() * b + spec.major.D.at(t).transpose() * g;
            ustar = CVec(&it.u0[it.major_u(j, p)], m);
            R = &spec.major.R;
            gamma = &spec.major.gamma;
        } else {
            const int k = role - 1, i = part(rng);
            const auto at = it.minor(j, p, k, i);
            const CVec b(&it.beta[at], n), g(&it.gamma[at], n);
            grad = spec.minor.B.at(t).transpose() * b + spec.types[k].D.at(t).transpose() * g;
            ustar = CVec(&it.u[it.minor_u(j, p, k, i)], m);
            R = &spec.types[k].R;
            gamma = &spec.types[k].gamma;
        }
        biggest = std::max(biggest, grad.norm());
        const Vector h = grad - *R * ustar;
        const Vector u = sample_feasible(*gamma, 1.0 + ustar.norm(), rng);
        res.max_violation = std::max(res.max_violation, h.dot(u - ustar));
        ++res.samples;
    }
    res.scale = 1.0 + biggest;
    return res;
}

}  // namespace mfg
