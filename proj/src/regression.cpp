#include "mfg/regression.hpp"

#include <cmath>
#include <vector>

namespace mfg {

void LinearFit::predict(const double* x, double* out) const
{
    const auto q = intercept.size(), nx = slope.rows();
    for (Eigen::Index c = 0; c < q; ++c) {
        double v = intercept[c];
        for (Eigen::Index r = 0; r < nx; ++r) v += slope(r, c) * x[r];
        out[c] = v;
    }
}

void Design::resize(int rows_, int nx_, int block_)
{
    if (block_ < 1 || rows_ % block_ != 0) throw StructuralError("design rows must split into whole blocks");
    rows = rows_;
    nx = nx_;
    block = block_;
    X.resize(static_cast<std::size_t>(rows) * nx);
}

void Targets::resize(int rows_, int q_)
{
    rows = rows_;
    q = q_;
    Y.resize(static_cast<std::size_t>(rows) * q);
}

LeastSquares::LeastSquares(const Design& d) : d_(&d)
{
    if (d.rows < 1) throw PreconditionError("regression on an empty design");
    const int nx = d.nx, nblocks = d.rows / d.block;
    std::vector<Vector> sx(nblocks);
#pragma omp parallel for schedule(static)
    for (int b = 0; b < nblocks; ++b) {
        Vector ax = Vector::Zero(nx);
        for (int r = b * d.block; r < (b + 1) * d.block; ++r)
            for (int c = 0; c < nx; ++c) ax[c] += d.x(r)[c];
        sx[b] = std::move(ax);
    }
    mx_ = Vector::Zero(nx);
    for (int b = 0; b < nblocks; ++b) mx_ += sx[b];
    mx_ /= d.rows;

    std::vector<Matrix> sxx(nblocks);
#pragma omp parallel for schedule(static)
    for (int b = 0; b < nblocks; ++b) {
        Matrix axx = Matrix::Zero(nx, nx);
        std::vector<double> cx(nx);
        for (int r = b * d.block; r < (b + 1) * d.block; ++r) {
            const double* x = d.x(r);
            for (int c = 0; c < nx; ++c) cx[c] = x[c] - mx_[c];
            for (int c = 0; c < nx; ++c)
                for (int e = c; e < nx; ++e) axx(e, c) += cx[e] * cx[c];
        }
        sxx[b] = std::move(axx);
    }
    Matrix S = Matrix::Zero(nx, nx);
    for (int b = 0; b < nblocks; ++b) S += sxx[b];
    S = S.selfadjointView<Eigen::Lower>();

    for (int c = 0; c < nx; ++c) {
        const double sd = std::sqrt(std::max(0.0, S(c, c)) / d.rows);
        if (sd > 1e-9 * (1.0 + std::abs(mx_[c]))) keep_.push_back(c);
        else deficient_ = true;
    }
    const auto nk = static_cast<Eigen::Index>(keep_.size());
    scale_ = Vector(nk);
    pinv_ = Matrix::Zero(nk, nk);
    if (nk == 0) return;
    Matrix C(nk, nk);
    for (Eigen::Index a = 0; a < nk; ++a) scale_[a] = std::sqrt(S(keep_[a], keep_[a]));
    for (Eigen::Index a = 0; a < nk; ++a)
        for (Eigen::Index b = 0; b < nk; ++b) C(a, b) = S(keep_[a], keep_[b]) / (scale_[a] * scale_[b]);
    Eigen::SelfAdjointEigenSolver<Matrix> es(C);
    if (es.info() != Eigen::Success) throw NumericError("regression eigensolver failed");
    const Vector& ev = es.eigenvalues();
    const double cut = 1e-10 * ev.maxCoeff();
    Vector inv = Vector::Zero(nk);
    for (Eigen::Index a = 0; a < nk; ++a) {
        if (ev[a] > cut) inv[a] = 1.0 / ev[a];
        else deficient_ = true;
    }
    pinv_ = es.eigenvectors() * inv.asDiagonal() * es.eigenvectors().transpose();
}

LinearFit LeastSquares::fit(const Targets& t) const
{
    const Design& d = *d_;
    if (t.rows != d.rows) throw StructuralError("targets and design have different row counts");
    const int nx = d.nx, q = t.q, nblocks = d.rows / d.block;
    std::vector<Vector> sy(nblocks);
#pragma omp parallel for schedule(static)
    for (int b = 0; b < nblocks; ++b) {
        Vector ay = Vector::Zero(q);
        for (int r = b * d.block; r < (b + 1) * d.block; ++r)
            for (int c = 0; c < q; ++c) ay[c] += t.y(r)[c];
        sy[b] = std::move(ay);
    }
    Vector my = Vector::Zero(q);
    for (int b = 0; b < nblocks; ++b) my += sy[b];
    my /= d.rows;

    LinearFit fit;
    fit.deficient = deficient_;
    fit.slope = Matrix::Zero(nx, q);
    const auto nk = static_cast<Eigen::Index>(keep_.size());
    if (nk > 0) {
        std::vector<Matrix> sxy(nblocks);
#pragma omp parallel for schedule(static)
        for (int b = 0; b < nblocks; ++b) {
            Matrix axy = Matrix::Zero(nk, q);
            std::vector<double> cx(nk), cy(q);
            for (int r = b * d.block; r < (b + 1) * d.block; ++r) {
                const double* x = d.x(r);
                const double* y = t.y(r);
                for (Eigen::Index a = 0; a < nk; ++a) cx[a] = x[keep_[a]] - mx_[keep_[a]];
                for (int c = 0; c < q; ++c) cy[c] = y[c] - my[c];
                for (int c = 0; c < q; ++c)
                    for (Eigen::Index a = 0; a < nk; ++a) axy(a, c) += cx[a] * cy[c];
            }
            sxy[b] = std::move(axy);
        }
        Matrix Sxy = Matrix::Zero(nk, q);
        for (int b = 0; b < nblocks; ++b) Sxy += sxy[b];
        const Matrix coef = pinv_ * (scale_.cwiseInverse().asDiagonal() * Sxy);
        for (Eigen::Index a = 0; a < nk; ++a) fit.slope.row(keep_[a]) = coef.row(a) / scale_[a];
    }
    fit.intercept = my - fit.slope.transpose() * mx_;
    return fit;
}

LinearFit fit_linear(const Design& d, const Targets& t) { return LeastSquares(d).fit(t); }

LinearFit fit_linear_reference(const Design& d, const Targets& t)
{
    if (d.rows < 1) throw PreconditionError("regression on an empty design");
    if (t.rows != d.rows) throw StructuralError("targets and design have different row counts");
    const Matrix X = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        d.X.data(), d.rows, d.nx);
    const Matrix Y = Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
        t.Y.data(), t.rows, t.q);
    const Vector mx = X.colwise().mean(), my = Y.colwise().mean();
    const Matrix Xc = X.rowwise() - mx.transpose();
    const Matrix Yc = Y.rowwise() - my.transpose();

    LinearFit fit;
    fit.slope = Matrix::Zero(d.nx, t.q);
    std::vector<int> keep;
    for (int c = 0; c < d.nx; ++c) {
        const double sd = Xc.col(c).norm() / std::sqrt(double(d.rows));
        if (sd > 1e-9 * (1.0 + std::abs(mx[c]))) keep.push_back(c);
        else fit.deficient = true;
    }
    if (!keep.empty()) {
        const auto nk = static_cast<Eigen::Index>(keep.size());
        Matrix Xs(d.rows, nk);
        Vector scale(nk);
        for (Eigen::Index a = 0; a < nk; ++a) {
            scale[a] = Xc.col(keep[a]).norm();
            Xs.col(a) = Xc.col(keep[a]) / scale[a];
        }
        Eigen::JacobiSVD<Matrix> svd;
        svd.setThreshold(1e-5);
        svd.compute(Xs, Eigen::ComputeThinU | Eigen::ComputeThinV);
        if (svd.rank() < nk) fit.deficient = true;
        const Matrix coef = svd.solve(Yc);
        for (Eigen::Index a = 0; a < nk; ++a) fit.slope.row(keep[a]) = coef.row(a) / scale[a];
    }
    fit.intercept = my - fit.slope.transpose() * mx;
    return fit;
}

}  // namespace mfg
