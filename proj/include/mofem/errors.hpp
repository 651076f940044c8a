#pragma once

#include <stdexcept>
#include <string>

namespace mofem {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A point or argument lies outside the admissible domain.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Invalid geometric data (non-positive profile, inconsistent derivative).
class GeometryError : public Error {
public:
    using Error::Error;
};

/// The requested combination of options is not supported.
class UnsupportedError : public Error {
public:
    using Error::Error;
};

/// Non-conformable matrix shapes.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// Operator is singular, indefinite, or otherwise unusable by the solver.
class OperatorError : public Error {
public:
    using Error::Error;
};

/// A factorization failed or is too ill-conditioned to trust.
class FactorizationError : public Error {
public:
    using Error::Error;
};

/// Generic solver failure (non-convergence inside a time loop, bad residual).
class SolverError : public Error {
public:
    using Error::Error;
};

/// The time integration produced non-finite values.
class BlowUpError : public SolverError {
public:
    BlowUpError(const std::string& what, long step) : SolverError(what), step_(step) {}
    long step() const noexcept { return step_; }

private:
    long step_;
};

/// A problem would exceed the desk-scale size guard.
class SizeGuardError : public Error {
public:
    using Error::Error;
};

/// Invalid run configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

} // namespace mofem
