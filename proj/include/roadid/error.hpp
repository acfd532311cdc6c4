#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace roadid {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A physical parameter, dimension or option is outside its valid domain.
class InvalidParameter : public Error {
public:
    using Error::Error;
};

/// Malformed input file. Carries the 1-based data row when known (0 otherwise).
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t row = 0)
        : Error(row > 0 ? what + " (row " + std::to_string(row) + ")" : what), row_(row) {}

    [[nodiscard]] std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

class IoError : public Error {
public:
    using Error::Error;
};

/// Generic numerical failure (non-finite input, divergence, non-convergence).
class NumericError : public Error {
public:
    NumericError(const std::string& what, long step = -1)
        : Error(step >= 0 ? what + " at step " + std::to_string(step) : what), step_(step) {}

    /// Recursion step at which the failure happened, or -1.
    [[nodiscard]] long step() const noexcept { return step_; }

private:
    long step_;
};

/// A weighted inversion lost numerical invertibility.
class IllConditioned : public NumericError {
public:
    using NumericError::NumericError;
};

/// The sensor layout cannot satisfy an estimator's rank requirement.
class StructuralRankError : public Error {
public:
    using Error::Error;
};

}  // namespace roadid
