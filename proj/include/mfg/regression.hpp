#pragma once

#include "mfg/types.hpp"

#include <vector>

namespace mfg {

/// Least-squares fit Y ~ [1, X] b.
struct LinearFit {
    Vector intercept;  // q
    Matrix slope;      // nx x q
    bool deficient = false;

    /// Fitted row for regressors x (length nx).
    void predict(const double* x, double* out) const;
};

/// Row-major regressors (no intercept column), grouped into equal blocks.
/// Per-block partial sums are reduced in block order so results do not
/// depend on the thread count.
struct Design {
    int rows = 0, nx = 0, block = 1;
    std::vector<double> X;

    void resize(int rows_, int nx_, int block_);
    double* x(int r) { return X.data() + static_cast<std::size_t>(r) * nx; }
    const double* x(int r) const { return X.data() + static_cast<std::size_t>(r) * nx; }
};

/// Row-major responses, rows x q.
struct Targets {
    int rows = 0, q = 0;
    std::vector<double> Y;

    void resize(int rows_, int q_);
    double* y(int r) { return Y.data() + static_cast<std::size_t>(r) * q; }
    const double* y(int r) const { return Y.data() + static_cast<std::size_t>(r) * q; }
};

/// Centered normal equations of one design, factored once and reused for
/// several target sets. Near-constant columns are dropped and the remaining
/// correlation matrix is pseudo-inverted; either event flags the fit.
class LeastSquares {
public:
    explicit LeastSquares(const Design& d);

    LinearFit fit(const Targets& t) const;
    bool deficient() const { return deficient_; }

private:
    const Design* d_;
    Vector mx_;
    std::vector<int> keep_;
    Vector scale_;
    Matrix pinv_;
    bool deficient_ = false;
};

LinearFit fit_linear(const Design& d, const Targets& t);

/// Same estimator through an SVD of the standardized design; serial reference.
LinearFit fit_linear_reference(const Design& d, const Targets& t);

}  // namespace mfg
