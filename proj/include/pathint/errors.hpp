#ifndef PATHINT_ERRORS_HPP
#define PATHINT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pathint {

// Base class for all library errors.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// The noise/control compatibility condition sigma*sigma^T = lambda*K*R^-1*K^T
// cannot be satisfied; the problem is outside the solvable class.
struct IncompatibleNoise : Error {
    using Error::Error;
};

struct DimensionMismatch : Error {
    using Error::Error;
};

// A user-supplied callable returned NaN or infinity.
struct NonFiniteValue : Error {
    using Error::Error;
};

// sigma*sigma^T is not invertible; the path density is degenerate.
struct SingularNoise : Error {
    using Error::Error;
};

// Hessian of the path functional has a nonpositive eigenvalue at the
// minimizer; the local Gaussian approximation does not exist.
struct IndefiniteHessian : Error {
    using Error::Error;
};

// The optimizer stopped without reaching the gradient tolerance.
struct NoConvergence : Error {
    using Error::Error;
};

// psi underflowed to zero even in log space (terminal cost too large
// relative to lambda).
struct DegeneratePsi : Error {
    using Error::Error;
};

struct UnstableGrid : Error {
    using Error::Error;
};

struct DimensionUnsupported : Error {
    using Error::Error;
};

struct ConfigInvalid : Error {
    using Error::Error;
};

struct SingularK : Error {
    using Error::Error;
};

struct ParseError : Error {
    using Error::Error;
};

struct CoverageError : Error {
    using Error::Error;
};

}  // namespace pathint

#endif
