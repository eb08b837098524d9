#pragma once

#include "mfg/convex.hpp"
#include "mfg/types.hpp"

#include <string>
#include <type_traits>
#include <utility>
#include <vector>

namespace mfg {

/// Piecewise-constant function of time; segment s covers [starts[s], starts[s+1]).
template <class T>
class Piecewise {
public:
    Piecewise() : starts_{0.0}, values_(1) {}
    Piecewise(T value) : starts_{0.0}, values_{std::move(value)} {}
    template <class Expr>
        requires(std::is_convertible_v<const Expr&, T> && !std::is_same_v<std::decay_t<Expr>, T> &&
                 !std::is_same_v<std::decay_t<Expr>, Piecewise>)
    Piecewise(const Expr& value) : starts_{0.0}, values_{T(value)}
    {
    }
    Piecewise(std::vector<double> starts, std::vector<T> values)
        : starts_(std::move(starts)), values_(std::move(values))
    {
        if (starts_.empty() || starts_.size() != values_.size() || starts_.front() != 0.0)
            throw ConfigError("piecewise coefficient needs segments starting at t = 0");
        for (std::size_t s = 1; s < starts_.size(); ++s)
            if (!(starts_[s] > starts_[s - 1]))
                throw ConfigError("piecewise segment starts must increase");
    }

    const T& at(double t) const
    {
        std::size_t s = 0;
        while (s + 1 < starts_.size() && starts_[s + 1] <= t) ++s;
        return values_[s];
    }

    bool is_constant() const { return values_.size() == 1; }
    const std::vector<double>& starts() const { return starts_; }
    const std::vector<T>& values() const { return values_; }

private:
    std::vector<double> starts_;
    std::vector<T> values_;
};

using TimeMatrix = Piecewise<Matrix>;
using TimeVector = Piecewise<Vector>;

struct MajorSpec {
    TimeMatrix A, B, C, D, F1, F2;
    TimeVector b, sigma;
    Matrix Q, R, G;
    double rho = 0.0;
    Vector x0;
    ConstraintSet gamma;
};

/// Coefficients shared by every minor type.
struct MinorShared {
    TimeMatrix B, C, F1, F2, H;
    TimeVector b, sigma;
    Matrix Q, G;
    double rho = 0.0;
    Vector x0;
};

struct MinorType {
    TimeMatrix A, D;
    Matrix R;
    double pi = 1.0;
    ConstraintSet gamma;
};

struct ModelSpec {
    int n = 1;
    int m = 1;
    double T = 1.0;
    MajorSpec major;
    MinorShared minor;
    std::vector<MinorType> types;

    int K() const { return static_cast<int>(types.size()); }
    Vector pi() const;
    /// Every time at which some coefficient changes value, starting with 0.
    std::vector<double> breakpoints() const;
};

/// Scalar spec with every coefficient zero except the cost weights R0 = R = 1;
/// convenient starting point for tests and examples.
ModelSpec scalar_spec(int K = 1);

struct ValidationReport {
    std::vector<std::string> violations;
    bool ok() const { return violations.empty(); }
};

/// Throws StructuralError on dimension mismatch; returns all other violations as data.
ValidationReport validate_spec(const ModelSpec& spec);

struct PopulationAssignment {
    int N = 0;
    std::vector<int> theta;   // 0-based type of agent i
    std::vector<int> counts;  // N_k
    Vector pi_N;
    double eps_N = 0.0;

    /// Index of the first agent of type k.
    int first_of(int k) const;
};

/// Largest-remainder apportionment, ties to the lower type index; agents sorted by type.
PopulationAssignment assign_population(const Vector& pi, int N);
PopulationAssignment assign_population(const ModelSpec& spec, int N);

/// Block form of the consistency system for the whole population.
struct StackedSystem {
    int n = 0, m = 0, K = 0;
    Vector Pi;
    Matrix A, B, C, D, R, R_inv, Q, G, H, F1_Pi, F2_Pi, Q_Pi, G_Pi, D0;
    Vector B0;
    double lambda_star = 0.0;
    double lambda_star_F1 = 0.0;

    double norm_A() const { return fro(A); }
};

/// Snapshot of the block matrices at time t.
StackedSystem build_stacked(const ModelSpec& spec, double t = 0.0);

/// One snapshot per coefficient segment.
std::vector<StackedSystem> build_stacked_all(const ModelSpec& spec);

/// Largest eigenvalue of (M + M')/2.
double max_sym_eigenvalue(const Matrix& m, const std::string& name);

struct H1Constants {
    double lambda1 = 0, lambda2 = 0;
    double k0 = 0, k1 = 0, k2 = 0, k3 = 0, k4 = 0, k5 = 0, k6 = 0;
    double k7_sq = 0, k8_sq = 0, k9 = 0, k10 = 0, k11_sq = 0, k12_sq = 0;
    double k1_hat = 0;
};

H1Constants operator_constants(const StackedSystem& sys);

/// Componentwise worst case over several snapshots.
H1Constants operator_constants(const std::vector<StackedSystem>& snapshots);

}  // namespace mfg
