#pragma once

#include <stdexcept>
#include <string>

namespace ldhole {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An argument lies outside the domain of the operation (negative distance,
/// unsupported dimension, mismatched point sets, ...).
class DomainError : public Error {
public:
    using Error::Error;
};

/// A factorization or quadrature could not be carried out to tolerance.
class NumericalError : public Error {
public:
    using Error::Error;
};

/// An iterative solver stopped at its iteration cap.
class ConvergenceError : public Error {
public:
    ConvergenceError(const std::string& what, double residual)
        : Error(what + " (residual " + std::to_string(residual) + ")"), residual_(residual) {}

    double residual() const noexcept { return residual_; }

private:
    double residual_;
};

/// Invalid user configuration (CLI flags, config file, input files).
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace ldhole
