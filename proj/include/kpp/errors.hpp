#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace kpp {

/// Input that cannot be interpreted at all (non-finite entries, dimension
/// mismatches, unparsable config).
class MalformedInput : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

/// Input is well-formed but violates an operation's precondition
/// (reducible matrix handed to the Perron solver, nonpositive test vector...).
class PreconditionError : public std::domain_error {
public:
    using std::domain_error::domain_error;
};

/// An iterative method ran out of iterations.
class ConvergenceError : public std::runtime_error {
public:
    ConvergenceError(const std::string& what, std::size_t iterations)
        : std::runtime_error(what + " (after " + std::to_string(iterations) + " iterations)"),
          iterations_(iterations) {}

    std::size_t iterations() const noexcept { return iterations_; }

private:
    std::size_t iterations_;
};

/// Time integration produced NaN, blew up, or lost positivity.
class IntegrationError : public std::runtime_error {
public:
    IntegrationError(const std::string& what, double time)
        : std::runtime_error(what + " at t=" + std::to_string(time)), time_(time) {}

    double time() const noexcept { return time_; }

private:
    double time_;
};

/// The front left the computational domain before the requested end time.
class DomainTooShort : public IntegrationError {
public:
    using IntegrationError::IntegrationError;
};

}  // namespace kpp
