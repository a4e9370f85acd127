#pragma once

#include <stdexcept>
#include <string>

namespace eigentrack {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input document or expression.
class ParseError : public Error {
public:
    using Error::Error;
};

/// Well-formed input that violates a documented invariant.
class ValidationError : public Error {
public:
    using Error::Error;
};

/// Numerical failure inside the eigensolver or an unverifiable result.
class SolverError : public Error {
public:
    using Error::Error;
};

/// Evaluation requested outside the region where a quantity is defined.
class DomainError : public Error {
public:
    using Error::Error;
};

/// Inconsistent inputs: mismatched meshes, disconnected graphs, unknown ids.
class InputError : public Error {
public:
    using Error::Error;
};

} // namespace eigentrack
