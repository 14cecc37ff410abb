#ifndef PARAMP_ERROR_HPP
#define PARAMP_ERROR_HPP

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>

namespace paramp {

/// Input outside the mathematical domain of an operation (non-positive
/// inductance, gap-closing field, ...).
class DomainError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// Argument in the valid domain type but outside a calibrated range.
class OutOfRangeError : public std::out_of_range {
public:
    using std::out_of_range::out_of_range;
};

/// Malformed or inconsistent input data (traces, configs, arguments).
class ValidationError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// A numerical procedure failed: bracketing, singular systems, divergence.
class NumericalError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Iterative solver ran out of iterations. `last_iterate` is a printable
/// summary of the state when it gave up.
class ConvergenceError : public NumericalError {
public:
    ConvergenceError(const std::string& what, std::string last_iterate)
        : NumericalError(what + " (last iterate: " + last_iterate + ")"),
          last_iterate_(std::move(last_iterate)) {}

    const std::string& last_iterate() const noexcept { return last_iterate_; }

private:
    std::string last_iterate_;
};

/// A search exhausted its domain without finding an admissible point.
class NotFoundError : public NumericalError {
public:
    using NumericalError::NumericalError;
};

/// Operation called on a state that violates its contract, e.g. computing
/// gain around an unstable pump branch.
class ContractViolation : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

/// CSV/JSON parse failure with a 1-based location.
class ParseError : public ValidationError {
public:
    ParseError(const std::string& reason, std::size_t line, std::size_t column)
        : ValidationError("line " + std::to_string(line) + ", column " + std::to_string(column) +
                          ": " + reason),
          line_(line),
          column_(column),
          reason_(reason) {}

    std::size_t line() const noexcept { return line_; }
    std::size_t column() const noexcept { return column_; }
    const std::string& reason() const noexcept { return reason_; }

private:
    std::size_t line_;
    std::size_t column_;
    std::string reason_;
};

}  // namespace paramp

#endif  // PARAMP_ERROR_HPP
