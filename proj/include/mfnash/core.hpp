// Shared numeric aliases, error types and tolerance defaults for the mfnash
// library.

#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace mfnash {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid game parameters or inconsistent dimensions.
class ParamError : public Error {
public:
    using Error::Error;
};

/// Empty or malformed Monte-Carlo sample bank.
class MomentError : public Error {
public:
    using Error::Error;
};

/// Shape mismatch in an encoder evaluation.
class EncodeError : public Error {
public:
    using Error::Error;
};

/// Unknown or invalid dataset specification.
class SpecError : public Error {
public:
    using Error::Error;
};

/// Malformed input file (CSV ingestion).
class DataError : public Error {
public:
    using Error::Error;
};

/// Singular or ill-posed linear system inside a backward pass.
class SolveError : public Error {
public:
    using Error::Error;
};

/// Probability weights with no usable mass.
class DegenerateError : public Error {
public:
    using Error::Error;
};

/// Non-finite prediction produced by a forward step.
class DynamicsError : public Error {
public:
    using Error::Error;
};

/// Out-of-range time index or incomplete trajectory.
class RangeError : public Error {
public:
    using Error::Error;
};

/// Tolerances used by structural and stochastic checks.
struct Tolerances {
    double structural{1e-10};  ///< exact algebraic identities
    double symmetry{1e-9};     ///< symmetry of value-function blocks
    double stochastic{1e-6};   ///< Monte-Carlo and iterative-oracle checks
    double simplex{1e-12};     ///< probability vectors summing to one
};

/// Library-wide default tolerances.
inline constexpr Tolerances kTolerances{};

/// Largest absolute entry, zero for empty matrices.
template <typename Derived>
double max_abs(const Eigen::MatrixBase<Derived>& m) {
    return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff();
}

/// True when every entry is finite.
template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& m) {
    return m.allFinite();
}

}  // namespace mfnash
