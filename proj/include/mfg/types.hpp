#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace mfg {

/// Largest state or control dimension handled by the fixed-capacity kernels.
inline constexpr int kMaxDim = 8;

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Heap-free vector and matrix types used inside per-particle loops.
using SVec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using SMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

/// Frobenius norm |M| = sqrt(tr(M'M)).
inline double fro(const Matrix& m) { return m.norm(); }

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed configuration or arguments.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Dimension mismatch between coefficient blocks.
class StructuralError : public Error {
public:
    using Error::Error;
};

/// Factorization, eigensolver or iterative-solve failure.
class NumericError : public Error {
public:
    using Error::Error;
};

/// A requested operation violates its documented precondition.
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// Memory estimate above the configured cap.
class CapacityError : public Error {
public:
    using Error::Error;
};

/// Non-finite value produced while integrating.
class DivergenceError : public Error {
public:
    DivergenceError(const std::string& what, int path, int type, int particle, int node)
        : Error(what), path(path), type(type), particle(particle), node(node) {}
    int path, type, particle, node;
};

}  // namespace mfg
