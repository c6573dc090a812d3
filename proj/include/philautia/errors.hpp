#pragma once

#include <stdexcept>
#include <string>

namespace philautia {

// Base class for all library errors. The CLI maps subclasses to exit codes:
// validation/parse -> 1, I/O -> 2, convergence/degeneracy -> 3.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Bad input data: schema violations, range violations, missing coverage,
// inconsistent axes, unknown ids.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Filesystem and network failures.
class IoError : public Error {
public:
    using Error::Error;
};

// An evaluator reply that does not contain a usable dollar-wrapped score.
// Collectors treat this as retryable.
class ParseError : public Error {
public:
    using Error::Error;
};

// Iterative solver hit its iteration cap before reaching tolerance.
class ConvergenceError : public Error {
public:
    using Error::Error;
};

// A quantity is mathematically undefined on the given input
// (all-tied rank vectors, constant min-max column, zero-variance z-score).
class DegeneracyError : public Error {
public:
    using Error::Error;
};

} // namespace philautia
