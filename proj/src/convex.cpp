#include "mfg/convex.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <vector>

namespace mfg {

std::string to_string(SetKind kind)
{
    switch (kind) {
    case SetKind::FullSpace: return "full";
    case SetKind::Box: return "box";
    case SetKind::Orthant: return "orthant";
    case SetKind::Subspace: return "subspace";
    case SetKind::Cone: return "cone";
    }
    return "unknown";
}

ConstraintSet ConstraintSet::full_space(int m)
{
    ConstraintSet s;
    s.kind_ = SetKind::FullSpace;
    s.m_ = m;
    return s;
}

ConstraintSet ConstraintSet::orthant(int m)
{
    ConstraintSet s;
    s.kind_ = SetKind::Orthant;
    s.m_ = m;
    s.lower_ = Vector::Zero(m);
    s.upper_ = Vector::Constant(m, std::numeric_limits<double>::infinity());
    return s;
}

ConstraintSet ConstraintSet::box(Vector lower, Vector upper)
{
    if (lower.size() != upper.size())
        throw StructuralError("box bounds have different lengths");
    for (Eigen::Index i = 0; i < lower.size(); ++i) {
        if (std::isnan(lower[i]) || std::isnan(upper[i]))
            throw ConfigError("box bound is NaN");
        if (!(lower[i] <= 0.0 && 0.0 <= upper[i]))
            throw ConfigError("box must contain the origin (coordinate " + std::to_string(i) + ")");
    }
    ConstraintSet s;
    s.kind_ = SetKind::Box;
    s.m_ = static_cast<int>(lower.size());
    s.lower_ = std::move(lower);
    s.upper_ = std::move(upper);
    return s;
}

ConstraintSet ConstraintSet::subspace(Matrix upsilon)
{
    if (upsilon.rows() == 0 || upsilon.cols() == 0)
        throw StructuralError("subspace constraint matrix is empty");
    Eigen::FullPivLU<Matrix> lu(upsilon);
    if (lu.rank() != upsilon.rows())
        throw ConfigError("subspace constraint matrix lacks full row rank");
    ConstraintSet s;
    s.kind_ = SetKind::Subspace;
    s.m_ = static_cast<int>(upsilon.cols());
    s.upsilon_ = std::move(upsilon);
    return s;
}

ConstraintSet ConstraintSet::cone(Matrix upsilon)
{
    if (upsilon.rows() == 0 || upsilon.cols() == 0)
        throw StructuralError("cone constraint matrix is empty");
    ConstraintSet s;
    s.kind_ = SetKind::Cone;
    s.m_ = static_cast<int>(upsilon.cols());
    s.upsilon_ = std::move(upsilon);
    return s;
}

double ConstraintSet::violation(const Vector& u) const
{
    if (u.size() != m_) throw StructuralError("control has wrong dimension for constraint set");
    double v = 0.0;
    switch (kind_) {
    case SetKind::FullSpace: break;
    case SetKind::Box:
    case SetKind::Orthant:
        for (int i = 0; i < m_; ++i) v = std::max({v, lower_[i] - u[i], u[i] - upper_[i]});
        break;
    case SetKind::Subspace: v = (upsilon_ * u).cwiseAbs().maxCoeff(); break;
    case SetKind::Cone: v = std::max(0.0, (upsilon_ * u).maxCoeff()); break;
    }
    return v;
}

WeightedMetric::WeightedMetric(const Matrix& r) : r_(r)
{
    if (r.rows() != r.cols() || r.rows() == 0) throw StructuralError("metric weight must be square");
    if ((r - r.transpose()).norm() > 1e-12 * (1.0 + r.norm()))
        throw NumericError("metric weight is not symmetric");
    Eigen::LLT<Matrix> llt(r);
    if (llt.info() != Eigen::Success) throw NumericError("metric weight is not positive definite");
    l_ = llt.matrixL();
    Eigen::SelfAdjointEigenSolver<Matrix> es(r, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    if (!(lo > 0.0)) throw NumericError("metric weight is not positive definite");
    condition_ = es.eigenvalues().maxCoeff() / lo;
    r_inv_ = llt.solve(Matrix::Identity(r.rows(), r.cols()));
    diagonal_ = (r - Matrix(r.diagonal().asDiagonal())).norm() == 0.0;
}

Projector::Projector(ConstraintSet gamma, WeightedMetric metric)
    : gamma_(std::move(gamma)), metric_(std::move(metric))
{
    const int m = gamma_.dim();
    if (metric_.R().rows() != m) throw StructuralError("metric and constraint set dimensions differ");
    switch (gamma_.kind()) {
    case SetKind::FullSpace: break;
    case SetKind::Box:
    case SetKind::Orthant:
        clamp_ = metric_.diagonal();
        if (!clamp_) {
            std::vector<Eigen::Index> rows;
            for (int i = 0; i < m; ++i) {
                if (std::isfinite(gamma_.upper()[i])) rows.push_back(i);
                if (std::isfinite(gamma_.lower()[i])) rows.push_back(-1 - i);
            }
            e_ = Matrix::Zero(static_cast<Eigen::Index>(rows.size()), m);
            h_ = Vector::Zero(static_cast<Eigen::Index>(rows.size()));
            for (std::size_t r = 0; r < rows.size(); ++r) {
                const auto c = rows[r];
                if (c >= 0) {
                    e_(r, c) = 1.0;
                    h_[r] = gamma_.upper()[c];
                } else {
                    e_(r, -1 - c) = -1.0;
                    h_[r] = -gamma_.lower()[-1 - c];
                }
            }
        }
        break;
    case SetKind::Subspace: {
        const Matrix& u = gamma_.upsilon();
        const Matrix& ri = metric_.R_inv();
        const Matrix s = u * ri * u.transpose();
        subspace_map_ = Matrix::Identity(m, m) - ri * u.transpose() * s.ldlt().solve(u);
        break;
    }
    case SetKind::Cone:
        e_ = gamma_.upsilon();
        h_ = Vector::Zero(e_.rows());
        break;
    }
}

// Primal active-set method for min 1/2 |y - x|_R^2 s.t. E y <= h, started at
// the feasible origin with an empty working set.
Vector Projector::active_set(const Vector& x) const
{
    const int m = gamma_.dim();
    const auto rows = static_cast<int>(e_.rows());
    const Matrix& ri = metric_.R_inv();
    Vector y = Vector::Zero(m);
    std::vector<int> work;
    std::vector<char> in_work(rows, 0);
    const double scale = 1.0 + x.norm();

    for (int iter = 0; iter < 10000; ++iter) {
        const auto w = static_cast<Eigen::Index>(work.size());
        Matrix ew(w, m);
        Vector hw(w);
        for (Eigen::Index r = 0; r < w; ++r) {
            ew.row(r) = e_.row(work[r]);
            hw[r] = h_[work[r]];
        }
        Vector z = x;
        Vector mu;
        if (w > 0) {
            const Matrix s = ew * ri * ew.transpose();
            mu = s.ldlt().solve(ew * x - hw);
            z = x - ri * ew.transpose() * mu;
        }
        const Vector p = z - y;
        if (p.norm() <= 1e-15 * scale) {
            Eigen::Index drop = -1;
            double worst = -1e-14 * scale;
            for (Eigen::Index r = 0; r < w; ++r)
                if (mu[r] < worst) {
                    worst = mu[r];
                    drop = r;
                }
            if (drop < 0) return z;
            in_work[work[drop]] = 0;
            work.erase(work.begin() + drop);
            continue;
        }
        double step = 1.0;
        int block = -1;
        for (int r = 0; r < rows; ++r) {
            if (in_work[r]) continue;
            const double ep = e_.row(r).dot(p);
            if (ep <= 1e-15 * scale) continue;
            const double room = std::max(0.0, h_[r] - e_.row(r).dot(y));
            if (room / ep < step) {
                step = room / ep;
                block = r;
            }
        }
        y += step * p;
        if (block >= 0) {
            work.push_back(block);
            in_work[block] = 1;
        }
    }
    throw NumericError("active-set projection did not terminate; residual " +
                       std::to_string(std::max(0.0, (e_ * y - h_).maxCoeff())));
}

Vector Projector::operator()(const Vector& x) const
{
    if (x.size() != gamma_.dim()) throw StructuralError("vector has wrong dimension for projection");
    switch (gamma_.kind()) {
    case SetKind::FullSpace: return x;
    case SetKind::Box:
    case SetKind::Orthant:
        if (clamp_) return x.cwiseMax(gamma_.lower()).cwiseMin(gamma_.upper());
        return active_set(x);
    case SetKind::Subspace: return subspace_map_ * x;
    case SetKind::Cone: return active_set(x);
    }
    return x;
}

void Projector::apply(SVec& x) const
{
    switch (gamma_.kind()) {
    case SetKind::FullSpace: return;
    case SetKind::Box:
    case SetKind::Orthant:
        if (clamp_) {
            for (Eigen::Index i = 0; i < x.size(); ++i)
                x[i] = std::min(std::max(x[i], gamma_.lower()[i]), gamma_.upper()[i]);
            return;
        }
        break;
    case SetKind::Subspace: x = subspace_map_ * x; return;
    case SetKind::Cone: break;
    }
    x = active_set(Vector(x));
}

Vector Projector::control(const Vector& p, const Vector& q, const Matrix& b, const Matrix& d) const
{
    return (*this)(metric_.R_inv() * (b.transpose() * p + d.transpose() * q));
}

Vector project(const Vector& x, const ConstraintSet& gamma, const WeightedMetric& metric)
{
    return Projector(gamma, metric)(x);
}

Vector control_map(const Vector& p, const Vector& q, const Matrix& b, const Matrix& d,
                   const ConstraintSet& gamma, const WeightedMetric& metric)
{
    if (b.rows() != p.size() || d.rows() != q.size() || b.cols() != gamma.dim() || d.cols() != gamma.dim())
        throw StructuralError("control_map dimensions are inconsistent");
    return Projector(gamma, metric).control(p, q, b, d);
}

Vector sample_feasible(const ConstraintSet& gamma, double scale, std::mt19937_64& rng)
{
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> unif;
    const int m = gamma.dim();
    Vector g(m);
    for (int i = 0; i < m; ++i) g[i] = scale * gauss(rng);
    switch (gamma.kind()) {
    case SetKind::FullSpace: return g;
    case SetKind::Box:
    case SetKind::Orthant: {
        Vector y(m);
        for (int i = 0; i < m; ++i) {
            const double lo = std::isfinite(gamma.lower()[i]) ? gamma.lower()[i] : -3.0 * scale;
            const double hi = std::isfinite(gamma.upper()[i]) ? gamma.upper()[i] : 3.0 * scale;
            const double r = unif(rng);
            y[i] = r < 0.2 ? lo : (r < 0.4 ? hi : lo + (hi - lo) * unif(rng));
        }
        return y;
    }
    case SetKind::Subspace:
        return project(g, gamma, WeightedMetric(Matrix::Identity(m, m)));
    case SetKind::Cone:
        return project(g, gamma, WeightedMetric(Matrix::Identity(m, m)));
    }
    return g;
}

double variational_residual(const Vector& x, const Vector& px, const ConstraintSet& gamma,
                            const WeightedMetric& metric, int samples, std::uint64_t seed)
{
    std::mt19937_64 rng(seed);
    const Vector g = metric.R() * (x - px);
    const double scale = 1.0 + x.norm() + px.norm();
    double worst = gamma.violation(px) > 1e-12 ? gamma.violation(px)
                                               : -std::numeric_limits<double>::infinity();
    auto visit = [&](const Vector& y) {
        if (gamma.contains(y, 1e-12)) worst = std::max(worst, g.dot(y - px));
    };
    visit(Vector::Zero(gamma.dim()));
    visit(2.0 * px);
    for (int s = 0; s < samples; ++s) visit(sample_feasible(gamma, scale, rng));
    return worst;
}

}  // namespace mfg
