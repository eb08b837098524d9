#include "mfg/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace mfg {

Vector ModelSpec::pi() const
{
    Vector p(K());
    for (int k = 0; k < K(); ++k) p[k] = types[k].pi;
    return p;
}

namespace {

template <class T>
void collect(const Piecewise<T>& f, std::set<double>& out)
{
    out.insert(f.starts().begin(), f.starts().end());
}

bool is_symmetric(const Matrix& m) { return (m - m.transpose()).norm() <= 1e-12 * (1.0 + m.norm()); }

double min_eigenvalue(const Matrix& m)
{
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericError("eigensolver failed");
    return es.eigenvalues().minCoeff();
}

void need_shape(const Matrix& m, int rows, int cols, const std::string& name)
{
    if (m.rows() != rows || m.cols() != cols)
        throw StructuralError(name + ": expected " + std::to_string(rows) + "x" + std::to_string(cols) +
                              ", got " + std::to_string(m.rows()) + "x" + std::to_string(m.cols()));
}

void need_shape(const TimeMatrix& f, int rows, int cols, const std::string& name)
{
    for (const auto& v : f.values()) need_shape(v, rows, cols, name);
}

void need_shape(const TimeVector& f, int rows, const std::string& name)
{
    for (const auto& v : f.values())
        if (v.size() != rows)
            throw StructuralError(name + ": expected length " + std::to_string(rows) + ", got " +
                                  std::to_string(v.size()));
}

void check_psd(const Matrix& m, const std::string& name, std::vector<std::string>& out)
{
    if (!is_symmetric(m)) out.push_back(name + " not symmetric");
    else if (min_eigenvalue(m) < -1e-12 * (1.0 + m.norm())) out.push_back(name + " not positive semidefinite");
}

void check_pd(const Matrix& m, const std::string& name, std::vector<std::string>& out)
{
    if (!is_symmetric(m)) out.push_back(name + " not symmetric");
    else if (!(min_eigenvalue(m) > 1e-12 * m.norm())) out.push_back(name + " not positive definite");
}

void check_finite(const TimeMatrix& f, const std::string& name, std::vector<std::string>& out)
{
    for (const auto& v : f.values())
        if (!v.allFinite()) {
            out.push_back(name + " has non-finite entries");
            return;
        }
}

void check_finite(const TimeVector& f, const std::string& name, std::vector<std::string>& out)
{
    for (const auto& v : f.values())
        if (!v.allFinite()) {
            out.push_back(name + " has non-finite entries");
            return;
        }
}

}  // namespace

std::vector<double> ModelSpec::breakpoints() const
{
    std::set<double> s{0.0};
    for (const auto* f : {&major.A, &major.B, &major.C, &major.D, &major.F1, &major.F2, &minor.B, &minor.C,
                          &minor.F1, &minor.F2, &minor.H})
        collect(*f, s);
    collect(major.b, s);
    collect(major.sigma, s);
    collect(minor.b, s);
    collect(minor.sigma, s);
    for (const auto& t : types) {
        collect(t.A, s);
        collect(t.D, s);
    }
    std::vector<double> out;
    for (double t : s)
        if (t < T) out.push_back(t);
    return out;
}

ModelSpec scalar_spec(int K)
{
    const Matrix z = Matrix::Zero(1, 1);
    const Matrix one = Matrix::Identity(1, 1);
    const Vector zv = Vector::Zero(1);
    ModelSpec s;
    s.n = s.m = 1;
    s.T = 1.0;
    s.major = MajorSpec{z, z, z, z, z, z, zv, zv, z, one, z, 0.0, Vector::Ones(1), ConstraintSet::full_space(1)};
    s.minor = MinorShared{z, z, z, z, z, zv, zv, z, z, 0.0, Vector::Ones(1)};
    for (int k = 0; k < K; ++k) s.types.push_back(MinorType{z, z, one, 1.0 / K, ConstraintSet::full_space(1)});
    return s;
}

ValidationReport validate_spec(const ModelSpec& s)
{
    const int n = s.n, m = s.m;
    if (n < 1 || m < 1) throw StructuralError("state and control dimensions must be positive");
    if (n > kMaxDim || m > kMaxDim)
        throw StructuralError("state and control dimensions are limited to " + std::to_string(kMaxDim));
    if (s.K() < 1) throw StructuralError("at least one minor type is required");

    need_shape(s.major.A, n, n, "A0");
    need_shape(s.major.B, n, m, "B0");
    need_shape(s.major.C, n, n, "C0");
    need_shape(s.major.D, n, m, "D0");
    need_shape(s.major.F1, n, n, "F0_1");
    need_shape(s.major.F2, n, n, "F0_2");
    need_shape(s.major.b, n, "b0");
    need_shape(s.major.sigma, n, "sigma0");
    need_shape(s.major.Q, n, n, "Q0");
    need_shape(s.major.R, m, m, "R0");
    need_shape(s.major.G, n, n, "G0");
    if (s.major.x0.size() != n) throw StructuralError("x0: expected length " + std::to_string(n));
    if (s.major.gamma.dim() != m) throw StructuralError("Gamma0: dimension differs from m");
    need_shape(s.minor.B, n, m, "B");
    need_shape(s.minor.C, n, n, "C");
    need_shape(s.minor.F1, n, n, "F1");
    need_shape(s.minor.F2, n, n, "F2");
    need_shape(s.minor.H, n, n, "H");
    need_shape(s.minor.b, n, "b");
    need_shape(s.minor.sigma, n, "sigma");
    need_shape(s.minor.Q, n, n, "Q");
    need_shape(s.minor.G, n, n, "G");
    if (s.minor.x0.size() != n) throw StructuralError("x: expected length " + std::to_string(n));
    for (int k = 0; k < s.K(); ++k) {
        const std::string id = std::to_string(k + 1);
        need_shape(s.types[k].A, n, n, "A_" + id);
        need_shape(s.types[k].D, n, m, "D_" + id);
        need_shape(s.types[k].R, m, m, "R_" + id);
        if (s.types[k].gamma.dim() != m) throw StructuralError("Gamma_" + id + ": dimension differs from m");
    }

    ValidationReport r;
    auto& v = r.violations;
    if (!(s.T > 0.0) || !std::isfinite(s.T)) v.push_back("T not positive");
    check_finite(s.major.A, "A0", v);
    check_finite(s.major.B, "B0", v);
    check_finite(s.major.C, "C0", v);
    check_finite(s.major.D, "D0", v);
    check_finite(s.major.F1, "F0_1", v);
    check_finite(s.major.F2, "F0_2", v);
    check_finite(s.major.b, "b0", v);
    check_finite(s.major.sigma, "sigma0", v);
    check_finite(s.minor.B, "B", v);
    check_finite(s.minor.C, "C", v);
    check_finite(s.minor.F1, "F1", v);
    check_finite(s.minor.F2, "F2", v);
    check_finite(s.minor.H, "H", v);
    check_finite(s.minor.b, "b", v);
    check_finite(s.minor.sigma, "sigma", v);
    if (!s.major.x0.allFinite()) v.push_back("x0 has non-finite entries");
    if (!s.minor.x0.allFinite()) v.push_back("x has non-finite entries");
    check_psd(s.major.Q, "Q0", v);
    check_psd(s.major.G, "G0", v);
    check_pd(s.major.R, "R0", v);
    check_psd(s.minor.Q, "Q", v);
    check_psd(s.minor.G, "G", v);
    if (!(s.major.rho >= 0.0 && s.major.rho <= 1.0)) v.push_back("rho0 out of [0,1]");
    if (!(s.minor.rho >= 0.0 && s.minor.rho <= 1.0)) v.push_back("rho out of [0,1]");
    double total = 0.0;
    for (int k = 0; k < s.K(); ++k) {
        const std::string id = std::to_string(k + 1);
        check_finite(s.types[k].A, "A_" + id, v);
        check_finite(s.types[k].D, "D_" + id, v);
        check_pd(s.types[k].R, "R_" + id, v);
        if (!(s.types[k].pi > 0.0)) v.push_back("pi_" + id + " not positive");
        total += s.types[k].pi;
    }
    if (!(std::abs(total - 1.0) <= 1e-12)) v.push_back("pi does not sum to 1");
    return r;
}

int PopulationAssignment::first_of(int k) const
{
    return std::accumulate(counts.begin(), counts.begin() + k, 0);
}

PopulationAssignment assign_population(const Vector& pi, int N)
{
    const auto K = static_cast<int>(pi.size());
    if (K < 1) throw PreconditionError("no minor types");
    if (N < K) throw PreconditionError("population smaller than type count");
    PopulationAssignment a;
    a.N = N;
    a.counts.assign(K, 0);
    std::vector<double> rem(K);
    int used = 0;
    for (int k = 0; k < K; ++k) {
        const double q = N * pi[k];
        a.counts[k] = static_cast<int>(std::floor(q));
        rem[k] = q - a.counts[k];
        used += a.counts[k];
    }
    std::vector<int> order(K);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int x, int y) { return rem[x] > rem[y]; });
    for (int r = 0; used < N; ++r, ++used) ++a.counts[order[r % K]];
    // Every type must be represented; borrow from the type with the largest surplus.
    for (int k = 0; k < K; ++k) {
        if (a.counts[k] > 0) continue;
        int donor = -1;
        double best = -1e300;
        for (int j = 0; j < K; ++j) {
            const double surplus = a.counts[j] - N * pi[j];
            if (a.counts[j] > 1 && surplus > best) {
                best = surplus;
                donor = j;
            }
        }
        --a.counts[donor];
        a.counts[k] = 1;
    }
    a.theta.reserve(N);
    for (int k = 0; k < K; ++k) a.theta.insert(a.theta.end(), a.counts[k], k);
    a.pi_N = Vector(K);
    a.eps_N = 0.0;
    for (int k = 0; k < K; ++k) {
        a.pi_N[k] = static_cast<double>(a.counts[k]) / N;
        a.eps_N = std::max(a.eps_N, std::abs(a.pi_N[k] - pi[k]));
    }
    return a;
}

PopulationAssignment assign_population(const ModelSpec& spec, int N) { return assign_population(spec.pi(), N); }

double max_sym_eigenvalue(const Matrix& m, const std::string& name)
{
    if (m.size() == 0) return 0.0;
    Eigen::SelfAdjointEigenSolver<Matrix> es(0.5 * (m + m.transpose()), Eigen::EigenvaluesOnly);
    if (es.info() != Eigen::Success) throw NumericError("eigensolver did not converge for " + name);
    return es.eigenvalues().maxCoeff();
}

StackedSystem build_stacked(const ModelSpec& s, double t)
{
    const int n = s.n, m = s.m, K = s.K(), L = K + 1;
    StackedSystem sys;
    sys.n = n;
    sys.m = m;
    sys.K = K;
    sys.Pi = Vector::Zero(L);
    for (int k = 0; k < K; ++k) sys.Pi[k + 1] = s.types[k].pi;

    const Eigen::Index N = static_cast<Eigen::Index>(L) * n, Mu = static_cast<Eigen::Index>(L) * m;
    sys.A = Matrix::Zero(N, N);
    sys.B = Matrix::Zero(N, Mu);
    sys.C = Matrix::Zero(N, N);
    sys.D = Matrix::Zero(N, Mu);
    sys.R = Matrix::Zero(Mu, Mu);
    sys.Q = Matrix::Zero(N, N);
    sys.G = Matrix::Zero(N, N);
    sys.H = Matrix::Zero(N, n);
    sys.F1_Pi = Matrix::Zero(N, N);
    sys.F2_Pi = Matrix::Zero(N, N);
    sys.Q_Pi = Matrix::Zero(N, N);
    sys.G_Pi = Matrix::Zero(N, N);
    sys.D0 = Matrix::Zero(N, L);
    sys.B0 = Vector::Zero(N);

    const auto& M0 = s.major;
    const auto& mi = s.minor;
    sys.A.block(0, 0, n, n) = M0.A.at(t);
    sys.B.block(0, 0, n, m) = M0.B.at(t);
    sys.C.block(0, 0, n, n) = M0.C.at(t);
    sys.D.block(0, 0, n, m) = M0.D.at(t);
    sys.R.block(0, 0, m, m) = M0.R;
    sys.Q.block(0, 0, n, n) = M0.Q;
    sys.G.block(0, 0, n, n) = M0.G;
    sys.B0.segment(0, n) = M0.b.at(t);
    sys.D0.block(0, 0, n, 1) = M0.sigma.at(t);
    for (int l = 0; l < L; ++l) {
        const double w = sys.Pi[l];
        sys.F1_Pi.block(0, l * n, n, n) = w * M0.F1.at(t);
        sys.F2_Pi.block(0, l * n, n, n) = w * M0.F2.at(t);
        sys.Q_Pi.block(0, l * n, n, n) = w * M0.rho * M0.Q;
        sys.G_Pi.block(0, l * n, n, n) = w * M0.rho * M0.G;
    }
    for (int k = 0; k < K; ++k) {
        const int r = (k + 1) * n, c = (k + 1) * m;
        sys.A.block(r, r, n, n) = s.types[k].A.at(t);
        sys.B.block(r, c, n, m) = mi.B.at(t);
        sys.C.block(r, r, n, n) = mi.C.at(t);
        sys.D.block(r, c, n, m) = s.types[k].D.at(t);
        sys.R.block(c, c, m, m) = s.types[k].R;
        sys.Q.block(r, r, n, n) = mi.Q;
        sys.Q.block(r, 0, n, n) = -(1.0 - mi.rho) * mi.Q;
        sys.G.block(r, r, n, n) = mi.G;
        sys.G.block(r, 0, n, n) = -(1.0 - mi.rho) * mi.G;
        sys.H.block(r, 0, n, n) = mi.H.at(t);
        sys.B0.segment(r, n) = mi.b.at(t);
        sys.D0.block(r, k + 1, n, 1) = mi.sigma.at(t);
        for (int l = 0; l < L; ++l) {
            const double w = sys.Pi[l];
            sys.F1_Pi.block(r, l * n, n, n) = w * mi.F1.at(t);
            sys.F2_Pi.block(r, l * n, n, n) = w * mi.F2.at(t);
            sys.Q_Pi.block(r, l * n, n, n) = w * mi.rho * mi.Q;
            sys.G_Pi.block(r, l * n, n, n) = w * mi.rho * mi.G;
        }
    }
    sys.R_inv = Matrix::Zero(Mu, Mu);
    for (int l = 0; l < L; ++l) {
        const Matrix blk = sys.R.block(l * m, l * m, m, m);
        Eigen::LDLT<Matrix> ldlt(blk);
        if (ldlt.info() != Eigen::Success) throw NumericError("R block " + std::to_string(l) + " is singular");
        sys.R_inv.block(l * m, l * m, m, m) = ldlt.solve(Matrix::Identity(m, m));
    }
    sys.lambda_star = max_sym_eigenvalue(sys.A, "stacked A");
    sys.lambda_star_F1 = max_sym_eigenvalue(sys.F1_Pi, "stacked F1_Pi");
    return sys;
}

std::vector<StackedSystem> build_stacked_all(const ModelSpec& spec)
{
    std::vector<StackedSystem> out;
    for (double t : spec.breakpoints()) out.push_back(build_stacked(spec, t));
    return out;
}

H1Constants operator_constants(const StackedSystem& s)
{
    H1Constants c;
    const double nb = fro(s.B), nd = fro(s.D), nri = fro(s.R_inv), nc = fro(s.C), nh = fro(s.H);
    c.lambda1 = c.lambda2 = s.lambda_star;
    c.k0 = fro(s.A);
    c.k1 = fro(s.F1_Pi);
    c.k2 = c.k3 = nri * nb * (nb + nd);
    c.k4 = fro(s.Q);
    c.k5 = fro(s.Q_Pi);
    c.k6 = nc;
    c.k7_sq = 4.0 * (nc + nh) * (nc + nh);
    c.k8_sq = 4.0 * fro(s.F2_Pi) * fro(s.F2_Pi);
    c.k9 = c.k10 = nri * nd * (nb + nd);
    c.k11_sq = 2.0 * fro(s.G) * fro(s.G);
    c.k12_sq = 2.0 * fro(s.G_Pi) * fro(s.G_Pi);
    c.k1_hat = s.lambda_star_F1;
    return c;
}

H1Constants operator_constants(const std::vector<StackedSystem>& snapshots)
{
    if (snapshots.empty()) throw PreconditionError("no stacked snapshots");
    H1Constants w = operator_constants(snapshots.front());
    for (std::size_t i = 1; i < snapshots.size(); ++i) {
        const H1Constants c = operator_constants(snapshots[i]);
        w.lambda1 = std::max(w.lambda1, c.lambda1);
        w.lambda2 = std::max(w.lambda2, c.lambda2);
        w.k0 = std::max(w.k0, c.k0);
        w.k1 = std::max(w.k1, c.k1);
        w.k2 = std::max(w.k2, c.k2);
        w.k3 = std::max(w.k3, c.k3);
        w.k4 = std::max(w.k4, c.k4);
        w.k5 = std::max(w.k5, c.k5);
        w.k6 = std::max(w.k6, c.k6);
        w.k7_sq = std::max(w.k7_sq, c.k7_sq);
        w.k8_sq = std::max(w.k8_sq, c.k8_sq);
        w.k9 = std::max(w.k9, c.k9);
        w.k10 = std::max(w.k10, c.k10);
        w.k11_sq = std::max(w.k11_sq, c.k11_sq);
        w.k12_sq = std::max(w.k12_sq, c.k12_sq);
        w.k1_hat = std::max(w.k1_hat, c.k1_hat);
    }
    return w;
}

}  // namespace mfg
