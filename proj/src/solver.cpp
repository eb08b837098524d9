#include "mfg/solver.hpp"

#include "node_model.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <tuple>

namespace mfg {

using detail::ModelTable;
using CVec = Eigen::Map<const Vector>;
using MVec = Eigen::Map<Vector>;

std::string to_string(DriverMode mode) { return mode == DriverMode::Frozen ? "frozen" : "coupled"; }

DriverMode driver_from_string(const std::string& name)
{
    if (name == "frozen") return DriverMode::Frozen;
    if (name == "coupled") return DriverMode::Coupled;
    throw ConfigError("unknown driver mode '" + name + "' (expected frozen or coupled)");
}

std::size_t CCIterate::bytes(const ModelSpec& spec, int P, int M, int J)
{
    const std::size_t n = spec.n, m = spec.m, K = spec.K();
    const std::size_t per_path = 3 * n + m + K * n + n + K * static_cast<std::size_t>(M) * (4 * n + m);
    return sizeof(double) * static_cast<std::size_t>(J + 1) * P * per_path;
}

CCIterate CCIterate::zeros(const ModelSpec& spec, const NoiseEnsemble& ens)
{
    CCIterate it;
    it.n = spec.n;
    it.m = spec.m;
    it.K = spec.K();
    it.P = ens.P;
    it.M = ens.M;
    it.J = ens.grid.J;
    const std::size_t nodes = static_cast<std::size_t>(it.J + 1) * it.P;
    const std::size_t parts = nodes * it.K * it.M;
    it.alpha0.assign(nodes * it.n, 0.0);
    it.beta0.assign(nodes * it.n, 0.0);
    it.gamma0.assign(nodes * it.n, 0.0);
    it.u0.assign(nodes * it.m, 0.0);
    it.alpha.assign(parts * it.n, 0.0);
    it.beta.assign(parts * it.n, 0.0);
    it.gamma.assign(parts * it.n, 0.0);
    it.gamma_k0.assign(parts * it.n, 0.0);
    it.u.assign(parts * it.m, 0.0);
    it.mean.assign(nodes * it.K * it.n, 0.0);
    it.phi.assign(nodes * it.n, 0.0);
    return it;
}

namespace {

struct Failure {
    int node = -1, path = 0, type = -1, particle = -1;
    bool operator<(const Failure& o) const
    {
        return std::tie(node, path, type, particle) < std::tie(o.node, o.path, o.type, o.particle);
    }
};

[[noreturn]] void raise(const Failure& f, const std::string& what)
{
    std::ostringstream os;
    os << what << " at path " << f.path << ", ";
    if (f.type < 0) os << "major";
    else os << "type " << f.type + 1 << ", particle " << f.particle;
    os << ", node " << f.node;
    throw DivergenceError(os.str(), f.path, f.type, f.particle, f.node);
}

void throw_first(const std::vector<Failure>& fails, const std::string& what)
{
    const Failure* first = nullptr;
    for (const auto& f : fails)
        if (f.node >= 0 && (!first || f < *first)) first = &f;
    if (first) raise(*first, what);
}

bool finite(const SVec& v) { return v.allFinite(); }

// Means, phi and controls at node j of path p.
void node_controls(const ModelTable& tab, CCIterate& it, int j, int p)
{
    const int n = tab.n, m = tab.m, K = tab.K, M = it.M;
    const auto& nd = tab.nodes[j];
    MVec phi(&it.phi[it.major(j, p)], n);
    phi.setZero();
    for (int k = 0; k < K; ++k) {
        MVec mk(&it.mean[it.mean_at(j, p, k)], n);
        mk.setZero();
        for (int i = 0; i < M; ++i) mk += CVec(&it.alpha[it.minor(j, p, k, i)], n);
        mk /= M;
        phi += tab.pi[k] * mk;
    }
    SVec v = nd.K0b * CVec(&it.beta0[it.major(j, p)], n) + nd.K0d * CVec(&it.gamma0[it.major(j, p)], n);
    tab.major.apply(v);
    MVec(&it.u0[it.major_u(j, p)], m) = v;
    for (int k = 0; k < K; ++k) {
        const auto& ty = nd.types[k];
        const auto& proj = tab.minor[k];
        for (int i = 0; i < M; ++i) {
            const std::size_t a = it.minor(j, p, k, i);
            v = ty.Kb * CVec(&it.beta[a], n) + ty.Kd * CVec(&it.gamma[a], n);
            proj.apply(v);
            MVec(&it.u[it.minor_u(j, p, k, i)], m) = v;
        }
    }
}

// Euler step j -> j+1 on path p; returns the first failure or node = -1.
Failure node_step(const ModelTable& tab, const NoiseEnsemble& ens, CCIterate& it, int j, int p)
{
    const int n = tab.n, m = tab.m, K = tab.K, M = it.M;
    const double dt = ens.grid.dt;
    const auto& nd = tab.nodes[j];
    const CVec phi(&it.phi[it.major(j, p)], n);
    const CVec a0(&it.alpha0[it.major(j, p)], n);
    const CVec u0(&it.u0[it.major_u(j, p)], m);
    const double dw0 = ens.common(p, j);
    SVec next = a0 + (nd.A0 * a0 + nd.B0 * u0 + nd.F01 * phi + nd.b0) * dt +
                (nd.C0 * a0 + nd.D0 * u0 + nd.F02 * phi + nd.s0) * dw0;
    if (!finite(next)) return Failure{j + 1, p, -1, -1};
    MVec(&it.alpha0[it.major(j + 1, p)], n) = next;
    const SVec drift_common = nd.F1 * phi + nd.b;
    const SVec diff_common = nd.F2 * phi + nd.H * a0 + nd.s;
    for (int k = 0; k < K; ++k) {
        const auto& ty = nd.types[k];
        for (int i = 0; i < M; ++i) {
            const std::size_t at = it.minor(j, p, k, i);
            const CVec a(&it.alpha[at], n);
            const CVec u(&it.u[it.minor_u(j, p, k, i)], m);
            const double dw = ens.particle(p, k, i, j);
            next = a + (ty.A * a + nd.B * u + drift_common) * dt + (nd.C * a + ty.D * u + diff_common) * dw;
            if (!finite(next)) return Failure{j + 1, p, k, i};
            MVec(&it.alpha[it.minor(j + 1, p, k, i)], n) = next;
        }
    }
    return Failure{};
}

void forward_impl(const ModelTable& tab, const NoiseEnsemble& ens, CCIterate& it)
{
    const int P = it.P, J = it.J, K = tab.K, M = it.M, n = tab.n;
    std::vector<Failure> fails(P);
#pragma omp parallel for schedule(static)
    for (int p = 0; p < P; ++p) {
        MVec(&it.alpha0[it.major(0, p)], n) = tab.x0;
        for (int k = 0; k < K; ++k)
            for (int i = 0; i < M; ++i) MVec(&it.alpha[it.minor(0, p, k, i)], n) = tab.x;
        for (int j = 0; j <= J; ++j) {
            node_controls(tab, it, j, p);
            if (j == J) break;
            const Failure f = node_step(tab, ens, it, j, p);
            if (f.node >= 0) {
                fails[p] = f;
                break;
            }
        }
    }
    throw_first(fails, "non-finite state");
}

struct Workspace {
    Design x0;
    Targets y0, e0, z0;
    std::vector<Design> xk;
    std::vector<Targets> yk, ek, zk;
};

// Per-path squared update norms at one node.
struct PathDelta {
    double y = 0, z = 0, z0 = 0;
    bool bad = false;
};

// Integrand targets use the residual after the conditional-mean fit, which
// removes the bulk of beta from the dW-weighted products.
BackwardStats backward_impl(const ModelTable& tab, const NoiseEnsemble& ens, CCIterate& it, DriverMode mode,
                            Workspace& ws)
{
    const int n = tab.n, K = tab.K, P = it.P, M = it.M, J = it.J;
    const double dt = ens.grid.dt;
    const bool frozen = mode == DriverMode::Frozen;
    std::vector<PathDelta> pd(P);
    BackwardStats stats;
    double ysup = 0, zsum = 0, z0sum = 0;

    auto reduce = [&](int j, bool integral) {
        double y = 0, z = 0, z0 = 0;
        for (int p = 0; p < P; ++p) {
            if (pd[p].bad) raise(Failure{j, p, -1, -1}, "non-finite adjoint");
            y += pd[p].y;
            z += pd[p].z;
            z0 += pd[p].z0;
        }
        ysup = std::max(ysup, y / P);
        if (integral) {
            zsum += dt * z / P;
            z0sum += dt * z0 / P;
        }
    };

#pragma omp parallel for schedule(static)
    for (int p = 0; p < P; ++p) {
        PathDelta d;
        const CVec phi(&it.phi[it.major(J, p)], n);
        const CVec a0(&it.alpha0[it.major(J, p)], n);
        MVec b0(&it.beta0[it.major(J, p)], n);
        const SVec nb0 = -tab.G0 * (a0 - tab.rho0 * phi);
        d.y += (nb0 - b0).squaredNorm();
        b0 = nb0;
        const SVec shift = tab.rho * phi + (1.0 - tab.rho) * a0;
        for (int k = 0; k < K; ++k) {
            double acc = 0;
            for (int i = 0; i < M; ++i) {
                const std::size_t at = it.minor(J, p, k, i);
                MVec b(&it.beta[at], n);
                const SVec nb = -tab.G * (CVec(&it.alpha[at], n) - shift);
                acc += (nb - b).squaredNorm();
                b = nb;
            }
            d.y += acc / M;
        }
        d.bad = !std::isfinite(d.y);
        pd[p] = d;
    }
    reduce(J, false);

    ws.x0.resize(P, n * (1 + K), P);
    ws.y0.resize(P, n);
    ws.e0.resize(P, n);
    ws.z0.resize(P, n);
    ws.xk.resize(K);
    ws.yk.resize(K);
    ws.ek.resize(K);
    ws.zk.resize(K);
    for (int k = 0; k < K; ++k) {
        ws.xk[k].resize(P * M, n * (2 + K), M);
        ws.yk[k].resize(P * M, n);
        ws.ek[k].resize(P * M, n);
        ws.zk[k].resize(P * M, 2 * n);
    }

    for (int j = J - 1; j >= 0; --j) {
        const auto& nd = tab.nodes[j];
#pragma omp parallel for schedule(static)
        for (int p = 0; p < P; ++p) {
            const double* a0 = &it.alpha0[it.major(j, p)];
            const double* mk = &it.mean[it.mean_at(j, p, 0)];
            double* x = ws.x0.x(p);
            std::copy(a0, a0 + n, x);
            std::copy(mk, mk + K * n, x + n);
            std::copy_n(&it.beta0[it.major(j + 1, p)], n, ws.y0.y(p));
            for (int k = 0; k < K; ++k)
                for (int i = 0; i < M; ++i) {
                    const int r = p * M + i;
                    double* xr = ws.xk[k].x(r);
                    std::copy_n(&it.alpha[it.minor(j, p, k, i)], n, xr);
                    std::copy(a0, a0 + n, xr + n);
                    std::copy(mk, mk + K * n, xr + 2 * n);
                    std::copy_n(&it.beta[it.minor(j + 1, p, k, i)], n, ws.yk[k].y(r));
                }
        }
        const LeastSquares ls0(ws.x0);
        const LinearFit fe0 = ls0.fit(ws.y0);
        std::vector<LeastSquares> lsk;
        std::vector<LinearFit> fek(K);
        lsk.reserve(K);
        for (int k = 0; k < K; ++k) {
            lsk.emplace_back(ws.xk[k]);
            fek[k] = lsk[k].fit(ws.yk[k]);
        }
        stats.warnings += ls0.deficient();
        for (int k = 0; k < K; ++k) stats.warnings += lsk[k].deficient();

#pragma omp parallel for schedule(static)
        for (int p = 0; p < P; ++p) {
            const double w0 = ens.common(p, j) / dt;
            fe0.predict(ws.x0.x(p), ws.e0.y(p));
            for (int c = 0; c < n; ++c) ws.z0.y(p)[c] = (ws.y0.y(p)[c] - ws.e0.y(p)[c]) * w0;
            for (int k = 0; k < K; ++k)
                for (int i = 0; i < M; ++i) {
                    const int r = p * M + i;
                    const double w = ens.particle(p, k, i, j) / dt;
                    fek[k].predict(ws.xk[k].x(r), ws.ek[k].y(r));
                    const double* y = ws.yk[k].y(r);
                    const double* e = ws.ek[k].y(r);
                    double* z = ws.zk[k].y(r);
                    for (int c = 0; c < n; ++c) {
                        const double res = y[c] - e[c];
                        z[c] = res * w;
                        z[n + c] = res * w0;
                    }
                }
        }
        const LinearFit fz0 = ls0.fit(ws.z0);
        std::vector<LinearFit> fzk(K);
        for (int k = 0; k < K; ++k) fzk[k] = lsk[k].fit(ws.zk[k]);

#pragma omp parallel for schedule(static)
        for (int p = 0; p < P; ++p) {
            PathDelta d;
            SVec yarg(n), zarg(n), nb(n), z(n);
            Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 2 * kMaxDim, 1> zz(2 * n);
            const CVec phi(&it.phi[it.major(j, p)], n);
            const CVec a0(&it.alpha0[it.major(j, p)], n);
            {
                const CVec e(ws.e0.y(p), n);
                z.resize(n);
                fz0.predict(ws.x0.x(p), z.data());
                MVec b(&it.beta0[it.major(j, p)], n);
                MVec g(&it.gamma0[it.major(j, p)], n);
                yarg = frozen ? SVec(b) : SVec(e);
                zarg = frozen ? SVec(g) : z;
                nb = e + dt * (nd.A0.transpose() * yarg - tab.Q0 * (a0 - tab.rho0 * phi) + nd.C0.transpose() * zarg);
                d.y += (nb - b).squaredNorm();
                d.z += (z - g).squaredNorm();
                b = nb;
                g = z;
            }
            const SVec shift = tab.rho * phi + (1.0 - tab.rho) * a0;
            for (int k = 0; k < K; ++k) {
                const auto& ty = nd.types[k];
                double ay = 0, az = 0, az0 = 0;
                for (int i = 0; i < M; ++i) {
                    const int r = p * M + i;
                    fzk[k].predict(ws.xk[k].x(r), zz.data());
                    const CVec e(ws.ek[k].y(r), n);
                    const std::size_t at = it.minor(j, p, k, i);
                    MVec b(&it.beta[at], n);
                    MVec g(&it.gamma[at], n);
                    MVec g0(&it.gamma_k0[at], n);
                    yarg = frozen ? SVec(b) : SVec(e);
                    zarg = frozen ? SVec(g) : SVec(zz.head(n));
                    nb = e + dt * (ty.A.transpose() * yarg - tab.Q * (CVec(&it.alpha[at], n) - shift) +
                                   nd.C.transpose() * zarg);
                    ay += (nb - b).squaredNorm();
                    az += (zz.head(n) - g).squaredNorm();
                    az0 += (zz.tail(n) - g0).squaredNorm();
                    b = nb;
                    g = zz.head(n);
                    g0 = zz.tail(n);
                }
                d.y += ay / M;
                d.z += az / M;
                d.z0 += az0 / M;
            }
            d.bad = !std::isfinite(d.y + d.z + d.z0);
            pd[p] = d;
        }
        reduce(j, true);
    }

    // The last node carries the final interval's integrand values.
    const std::size_t np = static_cast<std::size_t>(P) * n;
    const std::size_t nm = static_cast<std::size_t>(P) * K * M * n;
    std::copy_n(it.gamma0.begin() + (J - 1) * np, np, it.gamma0.begin() + J * np);
    std::copy_n(it.gamma.begin() + (J - 1) * nm, nm, it.gamma.begin() + J * nm);
    std::copy_n(it.gamma_k0.begin() + (J - 1) * nm, nm, it.gamma_k0.begin() + J * nm);
    stats.delta = std::sqrt(ysup + zsum + z0sum);
    return stats;
}

DecouplingField field_impl(const ModelTable& tab, const CCIterate& it)
{
    const int n = tab.n, K = tab.K, P = it.P, M = it.M, J = it.J;
    DecouplingField f;
    f.major.resize(J + 1);
    f.minor.resize(static_cast<std::size_t>(J + 1) * K);
    Design d0, dk;
    Targets t0, tk;
    d0.resize(P, n * (1 + K), P);
    t0.resize(P, 2 * n);
    dk.resize(P * M, n * (2 + K), M);
    tk.resize(P * M, 2 * n);
    for (int j = 0; j <= J; ++j) {
        for (int p = 0; p < P; ++p) {
            const double* a0 = &it.alpha0[it.major(j, p)];
            const double* mk = &it.mean[it.mean_at(j, p, 0)];
            std::copy(a0, a0 + n, d0.x(p));
            std::copy(mk, mk + K * n, d0.x(p) + n);
            std::copy_n(&it.beta0[it.major(j, p)], n, t0.y(p));
            std::copy_n(&it.gamma0[it.major(j, p)], n, t0.y(p) + n);
        }
        f.major[j] = fit_linear(d0, t0);
        for (int k = 0; k < K; ++k) {
#pragma omp parallel for schedule(static)
            for (int p = 0; p < P; ++p) {
                const double* a0 = &it.alpha0[it.major(j, p)];
                const double* mk = &it.mean[it.mean_at(j, p, 0)];
                for (int i = 0; i < M; ++i) {
                    const int r = p * M + i;
                    const std::size_t at = it.minor(j, p, k, i);
                    std::copy_n(&it.alpha[at], n, dk.x(r));
                    std::copy(a0, a0 + n, dk.x(r) + n);
                    std::copy(mk, mk + K * n, dk.x(r) + 2 * n);
                    std::copy_n(&it.beta[at], n, tk.y(r));
                    std::copy_n(&it.gamma[at], n, tk.y(r) + n);
                }
            }
            f.minor[static_cast<std::size_t>(j) * K + k] = fit_linear(dk, tk);
        }
    }
    return f;
}

void check_ensemble(const ModelSpec& spec, const NoiseEnsemble& ens, const CCIterate& it)
{
    if (ens.K != spec.K()) throw StructuralError("ensemble type count differs from the spec");
    if (std::abs(ens.grid.T - spec.T) > 1e-12 * spec.T) throw StructuralError("ensemble horizon differs from the spec");
    if (it.P != ens.P || it.M != ens.M || it.J != ens.grid.J || it.n != spec.n || it.m != spec.m || it.K != spec.K())
        throw StructuralError("iterate layout differs from the ensemble");
}

void check_basis(const ModelSpec& spec, const NoiseEnsemble& ens)
{
    const int n = spec.n, K = spec.K();
    if (ens.P <= 1 + n * (1 + K))
        throw PreconditionError("need more than " + std::to_string(1 + n * (1 + K)) +
                                " common paths for the major regression basis");
    if (static_cast<long>(ens.P) * ens.M <= 1 + n * (2 + K))
        throw PreconditionError("too few particles for the minor regression basis");
}

}  // namespace

void forward_pass(const ModelSpec& spec, const NoiseEnsemble& ens, CCIterate& it)
{
    check_ensemble(spec, ens, it);
    forward_impl(ModelTable(spec, ens.grid), ens, it);
}

BackwardStats backward_pass(const ModelSpec& spec, const NoiseEnsemble& ens, CCIterate& it, DriverMode mode)
{
    check_ensemble(spec, ens, it);
    check_basis(spec, ens);
    Workspace ws;
    return backward_impl(ModelTable(spec, ens.grid), ens, it, mode, ws);
}

DecouplingField fit_field(const ModelSpec& spec, const NoiseEnsemble& ens, const CCIterate& it)
{
    check_ensemble(spec, ens, it);
    check_basis(spec, ens);
    return field_impl(ModelTable(spec, ens.grid), it);
}

CCSolution picard_solve(const ModelSpec& spec, std::shared_ptr<const NoiseEnsemble> ens, const SolverOptions& opt)
{
    const auto rep = validate_spec(spec);
    if (!rep.ok()) throw PreconditionError("invalid spec: " + rep.violations.front());
    const std::size_t need = CCIterate::bytes(spec, ens->P, ens->M, ens->grid.J);
    if (need > opt.memory_cap)
        throw CapacityError("solution surfaces need " + std::to_string(need >> 20) + " MiB, cap is " +
                            std::to_string(opt.memory_cap >> 20) + " MiB");
    CCSolution sol;
    sol.spec = spec;
    sol.ensemble = ens;
    sol.it = CCIterate::zeros(spec, *ens);
    check_ensemble(spec, *ens, sol.it);
    check_basis(spec, *ens);
    auto& r = sol.report;
    r.driver = opt.driver;
    const ModelTable tab(spec, ens->grid);
    Workspace ws;
    for (int iter = 1; iter <= opt.max_iter; ++iter) {
        BackwardStats st;
        try {
            forward_impl(tab, *ens, sol.it);
            st = backward_impl(tab, *ens, sol.it, opt.driver, ws);
        } catch (const DivergenceError& e) {
            r.iterations = iter;
            r.diverged = true;
            r.message = e.what();
            break;
        }
        r.iterations = iter;
        r.regression_warnings += st.warnings;
        if (!r.deltas.empty() && r.deltas.back() > 0.0) r.ratios.push_back(st.delta / r.deltas.back());
        r.deltas.push_back(st.delta);
        if (!std::isfinite(st.delta)) {
            r.diverged = true;
            r.message = "non-finite Picard delta";
            break;
        }
        if (st.delta <= opt.tol) {
            r.converged = true;
            break;
        }
        if (st.delta > opt.blowup * std::max(1.0, r.deltas.front())) {
            r.diverged = true;
            r.message = "Picard deltas grew beyond the blow-up threshold";
            break;
        }
    }
    r.final_residual = r.deltas.empty() ? 0.0 : r.deltas.back();
    if (!r.diverged) {
        if (!r.converged) r.message = "maximum iterations reached";
        sol.field = field_impl(tab, sol.it);
        try {
            forward_impl(tab, *ens, sol.it);
        } catch (const DivergenceError& e) {
            r.diverged = true;
            r.message = e.what();
        }
    }
    return sol;
}

}  // namespace mfg
