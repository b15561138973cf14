#pragma once

#include <stdexcept>
#include <string>

namespace permpoint {

// Base class for everything thrown by this library.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Shape or index disagreement between operands.
struct DimensionError : Error {
    using Error::Error;
};

// Arguments outside an operation's domain (l == m, 2K > n, shares not
// summing to one, non-bijective permutation, ...).
struct DomainError : Error {
    using Error::Error;
};

// Non-finite values or a computation that left its valid numeric regime.
struct NumericError : Error {
    using Error::Error;
};

// Iteration budget exhausted; carries the residual at the point of failure.
struct ConvergenceError : NumericError {
    ConvergenceError(const std::string& what, double residual_)
        : NumericError(what), residual(residual_) {}
    double residual;
};

// Malformed external data (IDX containers, checkpoints).
struct FormatError : Error {
    using Error::Error;
};

// Filesystem trouble: missing files, unwritable outputs.
struct IoError : Error {
    using Error::Error;
};

// Inconsistent or incomplete experiment configuration.
struct ConfigError : Error {
    using Error::Error;
};

}  // namespace permpoint
