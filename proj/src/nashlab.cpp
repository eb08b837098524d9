#include "mfg/nashlab.hpp"

#include "strategy_impl.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

namespace mfg {

Deviation Deviation::self(int agent)
{
    Deviation d;
    d.kind = Kind::Self;
    d.agent = agent;
    d.label = "self";
    return d;
}

Deviation Deviation::zero(int agent)
{
    Deviation d;
    d.kind = Kind::Zero;
    d.agent = agent;
    d.label = "zero";
    return d;
}

Deviation Deviation::shifted(int agent, Vector shift, std::string label)
{
    Deviation d;
    d.kind = Kind::Shift;
    d.agent = agent;
    d.shift = std::move(shift);
    d.label = label.empty() ? "shift" : std::move(label);
    return d;
}

namespace {

using detail::CVec;

struct Limiting {
    PopulationAssignment pop;
    int path = 0;
    AgentPath major;
    std::vector<AgentPath> minors;
    std::vector<double> dW;  // agent-major, J per agent
};

Limiting limiting_paths(const CCSolution& sol, const detail::ModelTable& tab, int N, int rep, std::uint64_t seed)
{
    const int J = sol.it.J;
    const double sdt = std::sqrt(sol.ensemble->grid.dt);
    Limiting L;
    L.pop = assign_population(sol.spec, N);
    L.path = rep % sol.it.P;
    detail::check_solution(sol, L.path);
    detail::major_path(sol, tab, L.path, L.major);
    L.minors.resize(N);
    L.dW.resize(static_cast<std::size_t>(N) * J);
    for (int i = 0; i < N; ++i) {
        double* w = &L.dW[static_cast<std::size_t>(i) * J];
        for (int j = 0; j < J; ++j)
            w[j] = sdt * normal_at(seed, StreamRole::Agent, static_cast<std::uint32_t>(rep),
                                   static_cast<std::uint32_t>(N), static_cast<std::uint32_t>(i),
                                   static_cast<std::uint32_t>(j));
        detail::agent_path(sol, tab, L.pop.theta[i], w, L.path, L.minors[i]);
    }
    return L;
}

double half_quad(const SMat& A, const SVec& v) { return 0.5 * v.dot(A * v); }

struct CostTables {
    SMat Q0, R0, G0, Q, G;
    std::vector<SMat> R;
    const Projector* proj0 = nullptr;
    std::vector<const Projector*> proj;
};

CostTables cost_tables(const ModelSpec& spec, const detail::ModelTable& tab)
{
    CostTables c;
    c.Q0 = spec.major.Q;
    c.R0 = spec.major.R;
    c.G0 = spec.major.G;
    c.Q = spec.minor.Q;
    c.G = spec.minor.G;
    for (const auto& t : spec.types) c.R.push_back(t.R);
    c.proj0 = &tab.major;
    for (const auto& p : tab.minor) c.proj.push_back(&p);
    return c;
}

SVec deviate(const Deviation& dev, const Projector& proj, int j, const SVec& ubar, const SVec& x)
{
    switch (dev.kind) {
    case Deviation::Kind::None:
    case Deviation::Kind::Self:
        return ubar;
    case Deviation::Kind::Zero:
        return SVec::Zero(ubar.size());
    case Deviation::Kind::Shift: {
        SVec u = ubar + dev.shift;
        proj.apply(u);
        return u;
    }
    case Deviation::Kind::Custom: {
        const Vector u = dev.custom(j, Vector(ubar), Vector(x));
        if (u.size() != ubar.size()) throw StructuralError("candidate '" + dev.label + "' has the wrong dimension");
        if (!proj.set().contains(u, 1e-9))
            throw PreconditionError("candidate '" + dev.label + "' leaves the constraint set at node " +
                                    std::to_string(j));
        return u;
    }
    }
    return ubar;
}

// Trapezoid weights on the node grid.
double trap(int j, int J, double dt) { return (j == 0 || j == J) ? 0.5 * dt : dt; }

// With `limit` set the population average is replaced by Phi in every channel,
// which is the infinite-population system driven by the same noise.
void realize(const CCSolution& sol, const detail::ModelTable& tab, const CostTables& ct, const Limiting& L,
             const Deviation& dev, RealizedRun& out, bool limit = false)
{
    const int n = sol.it.n, m = sol.it.m, J = sol.it.J;
    const int N = L.pop.N;
    const double dt = sol.ensemble->grid.dt;
    if (dev.kind != Deviation::Kind::None && (dev.agent < 0 || dev.agent > N))
        throw PreconditionError("deviating agent out of range");
    if (dev.kind == Deviation::Kind::Shift && dev.shift.size() != m)
        throw StructuralError("shift must have the control dimension");
    const bool dev0 = dev.kind != Deviation::Kind::None && dev.agent == 0;
    const int devi = dev.kind != Deviation::Kind::None ? dev.agent - 1 : -1;

    out.N = N;
    out.n = n;
    out.m = m;
    out.J = J;
    out.path = L.path;
    out.assignment = L.pop;
    const std::size_t per = static_cast<std::size_t>(J + 1) * n;
    out.x0.assign(per, 0.0);
    out.average.assign(per, 0.0);
    out.x.assign(per * N, 0.0);
    out.xbar0 = L.major.x;
    out.xbar.resize(per * N);
    out.phi.assign(per, 0.0);
    out.cost.assign(N, 0.0);
    out.lim.assign(N, 0.0);
    out.cost0 = out.lim0 = 0.0;
    for (int i = 0; i < N; ++i) std::copy(L.minors[i].x.begin(), L.minors[i].x.end(), out.xbar.begin() + i * per);
    for (int j = 0; j <= J; ++j)
        std::copy_n(&sol.it.phi[sol.it.major(j, L.path)], n, out.phi.begin() + static_cast<std::ptrdiff_t>(j) * n);

    const double rho0 = tab.rho0, rho = tab.rho;
    SVec x0 = tab.x0;
    std::vector<SVec> xs(N, tab.x);
    std::vector<SVec> us(N);
    SVec avg(n), mf(n), u0(m), e(n);
    for (int j = 0; j <= J; ++j) {
        const auto& nd = tab.nodes[j];
        const double w = trap(j, J, dt);
        avg.setZero();
        for (int i = 0; i < N; ++i) avg += xs[i];
        avg /= static_cast<double>(N);
        std::copy(avg.data(), avg.data() + n, out.average.begin() + static_cast<std::ptrdiff_t>(j) * n);
        std::copy(x0.data(), x0.data() + n, out.x0.begin() + static_cast<std::ptrdiff_t>(j) * n);

        const SVec ubar0 = CVec(&L.major.u[static_cast<std::size_t>(j) * m], m);
        u0 = dev0 ? deviate(dev, *ct.proj0, j, ubar0, x0) : ubar0;
        const CVec phi(&out.phi[static_cast<std::size_t>(j) * n], n);
        if (limit)
            mf = phi;
        else
            mf = avg;
        const CVec xb0(&L.major.x[static_cast<std::size_t>(j) * n], n);

        // Costs at node j.
        e = x0 - rho0 * mf;
        if (j < J) {
            out.cost0 += w * (half_quad(ct.Q0, e) + half_quad(ct.R0, u0));
            out.lim0 += w * (half_quad(ct.Q0, SVec(xb0 - rho0 * phi)) + half_quad(ct.R0, ubar0));
        } else {
            out.cost0 += w * (half_quad(ct.Q0, e) + half_quad(ct.R0, u0)) + half_quad(ct.G0, e);
            const SVec el = xb0 - rho0 * phi;
            out.lim0 += w * (half_quad(ct.Q0, el) + half_quad(ct.R0, ubar0)) + half_quad(ct.G0, el);
        }
        for (int i = 0; i < N; ++i) {
            const int k = L.pop.theta[i];
            const SVec ubar = CVec(&L.minors[i].u[static_cast<std::size_t>(j) * m], m);
            us[i] = i == devi ? deviate(dev, *ct.proj[k], j, ubar, xs[i]) : ubar;
            std::copy(xs[i].data(), xs[i].data() + n, out.x.begin() + i * per + static_cast<std::ptrdiff_t>(j) * n);
            const CVec xb(&L.minors[i].x[static_cast<std::size_t>(j) * n], n);
            e = xs[i] - rho * mf - (1.0 - rho) * x0;
            const SVec el = xb - rho * phi - (1.0 - rho) * xb0;
            out.cost[i] += w * (half_quad(ct.Q, e) + half_quad(ct.R[k], us[i]));
            out.lim[i] += w * (half_quad(ct.Q, el) + half_quad(ct.R[k], ubar));
            if (j == J) {
                out.cost[i] += half_quad(ct.G, e);
                out.lim[i] += half_quad(ct.G, el);
            }
        }
        if (j == J) break;

        const double dW0 = sol.ensemble->common(L.path, j);
        for (int i = 0; i < N; ++i) {
            const auto& ty = nd.types[L.pop.theta[i]];
            const double dw = L.dW[static_cast<std::size_t>(i) * J + j];
            xs[i] = xs[i] + (ty.A * xs[i] + nd.B * us[i] + nd.F1 * mf + nd.b) * dt +
                    (nd.C * xs[i] + ty.D * us[i] + nd.F2 * mf + nd.H * x0 + nd.s) * dw;
            if (!xs[i].allFinite())
                throw DivergenceError("non-finite realized state", L.path, L.pop.theta[i], i + 1, j + 1);
        }
        x0 = x0 + (nd.A0 * x0 + nd.B0 * u0 + nd.F01 * mf + nd.b0) * dt +
             (nd.C0 * x0 + nd.D0 * u0 + nd.F02 * mf + nd.s0) * dW0;
        if (!x0.allFinite()) throw DivergenceError("non-finite realized state", L.path, -1, 0, j + 1);
    }
}

struct Context {
    detail::ModelTable tab;
    CostTables ct;
    Context(const CCSolution& sol) : tab(sol.spec, sol.ensemble->grid), ct(cost_tables(sol.spec, tab)) {}
};

void check_N(const CCSolution& sol, int N)
{
    if (N < sol.spec.K()) throw PreconditionError("N must give every type at least one agent");
}

double sq(const double* a, const double* b, int n)
{
    double s = 0;
    for (int c = 0; c < n; ++c) s += (a[c] - b[c]) * (a[c] - b[c]);
    return s;
}

void mean_se(const std::vector<double>& v, double& mean, double& se)
{
    const double R = static_cast<double>(v.size());
    mean = 0.0;
    for (double x : v) mean += x;
    mean /= R;
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    se = v.size() > 1 ? std::sqrt(ss / (R - 1.0) / R) : 0.0;
}

/// Per-replication costs of `agent`: column 2d is deviation d (0 = none) in the N-agent
/// system and column 2d + 1 the same deviation in the infinite-population system.
std::vector<std::vector<double>> paired_costs(const CCSolution& sol, int N, int agent,
                                              const std::vector<Deviation>& devs, int reps, std::uint64_t seed)
{
    check_N(sol, N);
    if (agent < 0 || agent > N) throw PreconditionError("agent index out of range");
    if (reps < 1) throw PreconditionError("need at least one replication");
    const Context ctx(sol);
    std::vector<std::vector<double>> out(reps, std::vector<double>(2 * (devs.size() + 1)));
    std::vector<std::string> errors(reps);
#pragma omp parallel for schedule(dynamic)
    for (int r = 0; r < reps; ++r) {
        try {
            const Limiting L = limiting_paths(sol, ctx.tab, N, r, seed);
            RealizedRun run;
            for (std::size_t d = 0; d <= devs.size(); ++d) {
                Deviation dv = d == 0 ? Deviation{} : devs[d - 1];
                dv.agent = agent;
                for (int lim = 0; lim < 2; ++lim) {
                    realize(sol, ctx.tab, ctx.ct, L, dv, run, lim == 1);
                    out[r][2 * d + lim] = agent == 0 ? run.cost0 : run.cost[agent - 1];
                }
            }
        } catch (const std::exception& e) {
            errors[r] = e.what();
        }
    }
    for (const auto& e : errors)
        if (!e.empty()) throw PreconditionError(e);
    return out;
}

PerturbationReport perturbation(const CCSolution& sol, int N, int agent, const std::vector<Deviation>& candidates,
                                int reps, std::uint64_t seed)
{
    const auto costs = paired_costs(sol, N, agent, candidates, reps, seed);
    PerturbationReport rep;
    rep.N = N;
    rep.agent = agent;
    rep.best = rep.best_excess = candidates.empty() ? 0.0 : -std::numeric_limits<double>::infinity();
    std::vector<double> d(reps), x(reps);
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const std::size_t k = 2 * (c + 1);
        for (int r = 0; r < reps; ++r) {
            d[r] = costs[r][0] - costs[r][k];
            x[r] = d[r] - (costs[r][1] - costs[r][k + 1]);
        }
        CandidateResult res;
        res.label = candidates[c].label;
        mean_se(d, res.improvement, res.se);
        mean_se(x, res.excess, res.excess_se);
        rep.best = std::max(rep.best, res.improvement);
        rep.best_excess = std::max(rep.best_excess, res.excess);
        rep.candidates.push_back(res);
    }
    rep.eps_hat = std::max(0.0, rep.best);
    rep.eps_excess = std::max(0.0, rep.best_excess);
    return rep;
}

const double kT975[] = {12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                        2.201,  2.179, 2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086,
                        2.080,  2.074, 2.069, 2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};

}  // namespace

RealizedRun simulate_realized(const CCSolution& sol, int N, int replication, std::uint64_t seed,
                              const Deviation& dev)
{
    check_N(sol, N);
    if (replication < 0) throw PreconditionError("replication index must be nonnegative");
    const Context ctx(sol);
    const Limiting L = limiting_paths(sol, ctx.tab, N, replication, seed);
    RealizedRun run;
    run.replication = replication;
    realize(sol, ctx.tab, ctx.ct, L, dev, run);
    return run;
}

RateFit rate_fit(const std::vector<double>& xs, const std::vector<double>& ys)
{
    if (xs.size() != ys.size()) throw StructuralError("rate fit needs paired values");
    if (xs.size() < 4) throw PreconditionError("rate fit needs at least four points");
    const int n = static_cast<int>(xs.size());
    std::vector<double> lx(n), ly(n);
    for (int i = 0; i < n; ++i) {
        if (!(xs[i] > 0) || !(ys[i] > 0) || !std::isfinite(ys[i]))
            throw PreconditionError("rate fit needs positive finite values");
        lx[i] = std::log(xs[i]);
        ly[i] = std::log(ys[i]);
    }
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double sxx = 0, sxy = 0, syy = 0;
    for (int i = 0; i < n; ++i) {
        sxx += (lx[i] - mx) * (lx[i] - mx);
        sxy += (lx[i] - mx) * (ly[i] - my);
        syy += (ly[i] - my) * (ly[i] - my);
    }
    if (!(sxx > 0)) throw PreconditionError("rate fit needs distinct N values");
    RateFit f;
    f.points = n;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    double rss = 0;
    for (int i = 0; i < n; ++i) {
        const double r = ly[i] - f.intercept - f.slope * lx[i];
        rss += r * r;
    }
    f.r2 = syy > 0 ? 1.0 - rss / syy : 1.0;
    f.slope_se = std::sqrt(rss / (n - 2) / sxx);
    const double t = n - 2 <= 30 ? kT975[n - 3] : 1.96;
    f.ci_low = f.slope - t * f.slope_se;
    f.ci_high = f.slope + t * f.slope_se;
    return f;
}

ConvergenceRow convergence_row(const CCSolution& sol, int N, int replications, std::uint64_t seed)
{
    check_N(sol, N);
    if (replications < 2) throw PreconditionError("need at least two replications");
    const int K = sol.it.K, n = sol.it.n, J = sol.it.J;
    const Context ctx(sol);
    struct Sample {
        double state = 0, agent = 0, moment = 0, gap0 = 0, cost0 = 0, lim0 = 0;
        std::vector<double> gap, cost, lim;
    };
    std::vector<Sample> s(replications);
    std::vector<std::string> errors(replications);
#pragma omp parallel for schedule(dynamic)
    for (int r = 0; r < replications; ++r) {
        try {
            const Limiting L = limiting_paths(sol, ctx.tab, N, r, seed);
            RealizedRun run;
            realize(sol, ctx.tab, ctx.ct, L, Deviation{}, run);
            Sample& o = s[r];
            o.gap.assign(K, 0.0);
            o.cost.assign(K, 0.0);
            o.lim.assign(K, 0.0);
            for (int j = 0; j <= J; ++j)
                o.state = std::max(o.state, sq(&run.average[static_cast<std::size_t>(j) * n],
                                               &run.phi[static_cast<std::size_t>(j) * n], n));
            const std::size_t per = static_cast<std::size_t>(J + 1) * n;
            const std::vector<double> zero(n, 0.0);
            for (int i = 0; i < N; ++i) {
                double g = 0, mm = 0;
                for (int j = 0; j <= J; ++j) {
                    g = std::max(g, sq(run.minor_at(i, j), &run.xbar[i * per + static_cast<std::size_t>(j) * n], n));
                    mm = std::max(mm, sq(run.minor_at(i, j), zero.data(), n));
                }
                o.agent += g;
                o.moment += mm;
                const int k = run.assignment.theta[i];
                o.gap[k] += std::abs(run.cost[i] - run.lim[i]);
                o.cost[k] += run.cost[i];
                o.lim[k] += run.lim[i];
            }
            o.agent /= N;
            o.moment /= N;
            for (int k = 0; k < K; ++k) {
                const double c = run.assignment.counts[k];
                o.gap[k] /= c;
                o.cost[k] /= c;
                o.lim[k] /= c;
            }
            o.gap0 = std::abs(run.cost0 - run.lim0);
            o.cost0 = run.cost0;
            o.lim0 = run.lim0;
        } catch (const std::exception& e) {
            errors[r] = e.what();
        }
    }
    for (const auto& e : errors)
        if (!e.empty()) throw PreconditionError(e);

    ConvergenceRow row;
    row.N = N;
    std::vector<double> v(replications);
    auto stat = [&](auto get, double& mean, double& se) {
        for (int r = 0; r < replications; ++r) v[r] = get(s[r]);
        mean_se(v, mean, se);
    };
    double unused = 0;
    stat([](const Sample& x) { return x.state; }, row.state_gap, row.state_gap_se);
    stat([](const Sample& x) { return x.agent; }, row.agent_gap, row.agent_gap_se);
    stat([](const Sample& x) { return x.moment; }, row.second_moment, unused);
    stat([](const Sample& x) { return x.gap0; }, row.cost_gap0, row.cost_gap0_se);
    stat([](const Sample& x) { return x.cost0; }, row.cost_mean0, unused);
    stat([](const Sample& x) { return x.lim0; }, row.lim_mean0, unused);
    row.cost_gap.resize(K);
    row.cost_gap_se.resize(K);
    row.cost_mean.resize(K);
    row.lim_mean.resize(K);
    for (int k = 0; k < K; ++k) {
        stat([k](const Sample& x) { return x.gap[k]; }, row.cost_gap[k], row.cost_gap_se[k]);
        stat([k](const Sample& x) { return x.cost[k]; }, row.cost_mean[k], unused);
        stat([k](const Sample& x) { return x.lim[k]; }, row.lim_mean[k], unused);
    }
    return row;
}

NashReport convergence_study(const CCSolution& sol, const NashOptions& opt)
{
    NashReport rep;
    for (int N : opt.Ns) rep.rows.push_back(convergence_row(sol, N, opt.replications, opt.seed));
    if (opt.Ns.size() < 4) return rep;
    std::vector<double> xs, a, b, c, d;
    for (const auto& r : rep.rows) {
        xs.push_back(r.N);
        a.push_back(r.state_gap);
        b.push_back(r.agent_gap);
        c.push_back(r.second_moment);
        d.push_back(r.cost_gap0);
    }
    auto fit = [&](const std::vector<double>& ys) -> std::optional<RateFit> {
        for (double y : ys)
            if (!(y > 0)) return std::nullopt;
        return rate_fit(xs, ys);
    };
    rep.state_fit = fit(a);
    rep.agent_fit = fit(b);
    rep.moment_fit = fit(c);
    rep.cost_fit0 = fit(d);
    for (int k = 0; k < sol.it.K; ++k) {
        std::vector<double> g;
        for (const auto& r : rep.rows) g.push_back(r.cost_gap[k]);
        if (auto f = fit(g)) rep.cost_fit.push_back(*f);
    }
    if (static_cast<int>(rep.cost_fit.size()) != sol.it.K) rep.cost_fit.clear();
    return rep;
}

std::vector<double> state_average_gap(const NashReport& report)
{
    if (report.rows.size() < 4) throw PreconditionError("need at least four N-values");
    std::vector<double> out;
    for (const auto& r : report.rows) out.push_back(r.state_gap);
    return out;
}

std::vector<std::vector<double>> cost_gap_study(const NashReport& report)
{
    if (report.rows.size() < 4) throw PreconditionError("need at least four N-values");
    std::vector<std::vector<double>> out;
    for (const auto& r : report.rows) {
        std::vector<double> row{r.cost_gap0};
        row.insert(row.end(), r.cost_gap.begin(), r.cost_gap.end());
        out.push_back(row);
    }
    return out;
}

PerturbationReport major_perturbation(const CCSolution& sol, int N, const std::vector<Deviation>& candidates,
                                      int replications, std::uint64_t seed)
{
    return perturbation(sol, N, 0, candidates, replications, seed);
}

PerturbationReport minor_perturbation(const CCSolution& sol, int N, int agent,
                                      const std::vector<Deviation>& candidates, int replications,
                                      std::uint64_t seed)
{
    if (agent < 1 || agent > N) throw PreconditionError("minor agent index must be in 1..N");
    return perturbation(sol, N, agent, candidates, replications, seed);
}

Deviation best_response_shift(const CCSolution& sol, int N, int agent, int replications, std::uint64_t seed,
                              int iterations, double bound)
{
    const int m = sol.it.m;
    const double h = 0.05;
    Vector theta = Vector::Zero(m);
    auto mean_cost = [&](const std::vector<Vector>& thetas) {
        std::vector<Deviation> devs;
        for (const auto& t : thetas) devs.push_back(Deviation::shifted(agent, t));
        const auto c = paired_costs(sol, N, agent, devs, replications, seed);
        std::vector<double> out(thetas.size(), 0.0);
        for (const auto& row : c)
            for (std::size_t d = 0; d < thetas.size(); ++d) out[d] += row[2 * (d + 1)];
        for (double& v : out) v /= replications;
        return out;
    };
    for (int it = 0; it < iterations; ++it) {
        for (int c = 0; c < m; ++c) {
            Vector lo = theta, hi = theta;
            lo(c) -= h;
            hi(c) += h;
            const auto f = mean_cost({lo, theta, hi});
            const double g = (f[2] - f[0]) / (2 * h);
            const double H = (f[2] - 2 * f[1] + f[0]) / (h * h);
            double step = H > 0 ? -g / H : (g > 0 ? -0.5 : 0.5);
            step = std::clamp(step, -0.5, 0.5);
            theta(c) = std::clamp(theta(c) + step, -bound, bound);
        }
    }
    return Deviation::shifted(agent, theta, "best-response");
}

std::vector<Deviation> deviation_family(const CCSolution& sol, int N, int agent, int replications,
                                        std::uint64_t seed)
{
    const Vector ones = Vector::Ones(sol.it.m);
    std::vector<Deviation> f{Deviation::self(agent), Deviation::zero(agent)};
    for (double c : {-0.3, -0.1, 0.1, 0.3}) {
        char buf[32];
        std::snprintf(buf, sizeof buf, "shift%+.1f", c);
        f.push_back(Deviation::shifted(agent, c * ones, buf));
    }
    f.push_back(best_response_shift(sol, N, agent, replications, seed));
    return f;
}

namespace reference {

RealizedRun simulate_realized(const CCSolution& sol, int N, int replication, std::uint64_t seed)
{
    const auto& spec = sol.spec;
    const int n = spec.n, J = sol.it.J;
    const double dt = sol.ensemble->grid.dt;
    const PopulationAssignment pop = assign_population(spec, N);
    const int p = replication % sol.it.P;
    const AgentPath major = major_strategy(sol, p);
    std::vector<AgentPath> minors;
    std::vector<std::vector<double>> noise(N, std::vector<double>(J));
    for (int i = 0; i < N; ++i) {
        for (int j = 0; j < J; ++j)
            noise[i][j] = std::sqrt(dt) * normal_at(seed, StreamRole::Agent, replication, N, i, j);
        minors.push_back(decentralized_strategy(sol, pop.theta[i], noise[i], p));
    }
    auto vec = [](const std::vector<double>& a, int j, int d) { return Vector(Eigen::Map<const Vector>(&a[j * d], d)); };

    RealizedRun run;
    run.N = N;
    run.n = n;
    run.m = spec.m;
    run.J = J;
    run.replication = replication;
    run.path = p;
    run.assignment = pop;
    run.xbar0 = major.x;
    run.cost.assign(N, 0.0);
    run.lim.assign(N, 0.0);
    std::vector<Vector> x(N, spec.minor.x0);
    std::vector<std::vector<double>> xs(N);
    Vector x0 = spec.major.x0;
    auto half = [](const Matrix& A, const Vector& v) { return 0.5 * v.dot(A * v); };
    for (int j = 0; j <= J; ++j) {
        const double t = sol.ensemble->grid.t(j);
        const double w = (j == 0 || j == J) ? 0.5 * dt : dt;
        Vector avg = Vector::Zero(n);
        for (int i = 0; i < N; ++i) avg += x[i];
        avg /= static_cast<double>(N);
        const Vector phi = Eigen::Map<const Vector>(&sol.it.phi[sol.it.major(j, p)], n);
        const Vector u0 = vec(major.u, j, spec.m);
        const Vector xb0 = vec(major.x, j, n);
        for (int c = 0; c < n; ++c) {
            run.x0.push_back(x0(c));
            run.average.push_back(avg(c));
            run.phi.push_back(phi(c));
        }
        const Vector e0 = x0 - spec.major.rho * avg, l0 = xb0 - spec.major.rho * phi;
        run.cost0 += w * (half(spec.major.Q, e0) + half(spec.major.R, u0));
        run.lim0 += w * (half(spec.major.Q, l0) + half(spec.major.R, u0));
        if (j == J) {
            run.cost0 += half(spec.major.G, e0);
            run.lim0 += half(spec.major.G, l0);
        }
        for (int i = 0; i < N; ++i) {
            const Vector u = vec(minors[i].u, j, spec.m);
            const Matrix& R = spec.types[pop.theta[i]].R;
            const Vector e = x[i] - spec.minor.rho * avg - (1 - spec.minor.rho) * x0;
            const Vector l = vec(minors[i].x, j, n) - spec.minor.rho * phi - (1 - spec.minor.rho) * xb0;
            run.cost[i] += w * (half(spec.minor.Q, e) + half(R, u));
            run.lim[i] += w * (half(spec.minor.Q, l) + half(R, u));
            if (j == J) {
                run.cost[i] += half(spec.minor.G, e);
                run.lim[i] += half(spec.minor.G, l);
            }
            for (int c = 0; c < n; ++c) xs[i].push_back(x[i](c));
        }
        if (j == J) break;
        const auto& M = spec.major;
        const auto& mi = spec.minor;
        for (int i = 0; i < N; ++i) {
            const auto& ty = spec.types[pop.theta[i]];
            const Vector u = vec(minors[i].u, j, spec.m);
            x[i] = x[i] + (ty.A.at(t) * x[i] + mi.B.at(t) * u + mi.F1.at(t) * avg + mi.b.at(t)) * dt +
                   (mi.C.at(t) * x[i] + ty.D.at(t) * u + mi.F2.at(t) * avg + mi.H.at(t) * x0 + mi.sigma.at(t)) *
                       noise[i][j];
        }
        x0 = x0 + (M.A.at(t) * x0 + M.B.at(t) * u0 + M.F1.at(t) * avg + M.b.at(t)) * dt +
             (M.C.at(t) * x0 + M.D.at(t) * u0 + M.F2.at(t) * avg + M.sigma.at(t)) * sol.ensemble->common(p, j);
    }
    for (int i = 0; i < N; ++i) {
        run.x.insert(run.x.end(), xs[i].begin(), xs[i].end());
        run.xbar.insert(run.xbar.end(), minors[i].x.begin(), minors[i].x.end());
    }
    return run;
}

}  // namespace reference

}  // namespace mfg
