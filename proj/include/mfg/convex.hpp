#pragma once

#include "mfg/types.hpp"

#include <cstdint>
#include <random>
#include <string>

namespace mfg {

enum class SetKind { FullSpace, Box, Orthant, Subspace, Cone };

std::string to_string(SetKind kind);

/// Closed convex control set containing the origin.
///
/// Box: lower <= u <= upper, infinite bounds allowed.
/// Subspace: {u : Upsilon u = 0}, Upsilon with full row rank.
/// Cone: {u : Upsilon u <= 0}.
class ConstraintSet {
public:
    ConstraintSet() = default;

    static ConstraintSet full_space(int m);
    static ConstraintSet orthant(int m);
    static ConstraintSet box(Vector lower, Vector upper);
    static ConstraintSet subspace(Matrix upsilon);
    static ConstraintSet cone(Matrix upsilon);

    SetKind kind() const { return kind_; }
    int dim() const { return m_; }
    const Vector& lower() const { return lower_; }
    const Vector& upper() const { return upper_; }
    const Matrix& upsilon() const { return upsilon_; }

    /// Maximum constraint violation of u (0 when feasible).
    double violation(const Vector& u) const;
    bool contains(const Vector& u, double tol = 1e-10) const { return violation(u) <= tol; }

private:
    SetKind kind_ = SetKind::FullSpace;
    int m_ = 0;
    Vector lower_, upper_;
    Matrix upsilon_;
};

/// Weighted inner product <Rx, y> with R = L L'.
class WeightedMetric {
public:
    WeightedMetric() = default;
    explicit WeightedMetric(const Matrix& r);

    const Matrix& R() const { return r_; }
    const Matrix& L() const { return l_; }
    const Matrix& R_inv() const { return r_inv_; }
    bool diagonal() const { return diagonal_; }
    double condition() const { return condition_; }
    double norm(const Vector& x) const { return (l_.transpose() * x).norm(); }

private:
    Matrix r_, l_, r_inv_;
    bool diagonal_ = true;
    double condition_ = 1.0;
};

/// Projection onto a fixed set under a fixed metric with all factorizations cached.
class Projector {
public:
    Projector() = default;
    Projector(ConstraintSet gamma, WeightedMetric metric);

    const ConstraintSet& set() const { return gamma_; }
    const WeightedMetric& metric() const { return metric_; }
    bool identity() const { return gamma_.kind() == SetKind::FullSpace; }

    Vector operator()(const Vector& x) const;

    /// In-place variant for the fixed-capacity kernel types.
    void apply(SVec& x) const;

    /// P[R^{-1}(B'p + D'q)].
    Vector control(const Vector& p, const Vector& q, const Matrix& b, const Matrix& d) const;

private:
    Vector active_set(const Vector& x) const;

    ConstraintSet gamma_;
    WeightedMetric metric_;
    bool clamp_ = false;
    Matrix subspace_map_;
    Matrix e_;
    Vector h_;
};

/// argmin over y in gamma of |x - y|_R.
Vector project(const Vector& x, const ConstraintSet& gamma, const WeightedMetric& metric);

/// P_gamma[R^{-1}(B'p + D'q)] under |.|_R.
Vector control_map(const Vector& p, const Vector& q, const Matrix& b, const Matrix& d,
                   const ConstraintSet& gamma, const WeightedMetric& metric);

/// Random feasible point of magnitude about `scale`, boundary points included.
Vector sample_feasible(const ConstraintSet& gamma, double scale, std::mt19937_64& rng);

/// Max over sampled feasible y of <R(x - px), y - px>; nonpositive up to rounding
/// exactly when px is the projection of x.
double variational_residual(const Vector& x, const Vector& px, const ConstraintSet& gamma,
                            const WeightedMetric& metric, int samples, std::uint64_t seed = 0x5eed);

}  // namespace mfg
