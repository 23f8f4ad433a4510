#pragma once

#include <stdexcept>
#include <string>

namespace fiberspec {

// Basis enumeration would exceed the configured state budget.
class CapacityError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The shifted operator H(xi - k) + (|k| - E) is not positive definite.
// Resolvent-based identities are only valid where the shift has a gap;
// callers catch this to mark a channel as outside the valid cone.
class IndefiniteShiftError : public std::runtime_error {
public:
    IndefiniteShiftError(const std::string& what, double lowest_eigenvalue)
        : std::runtime_error(what), lowest(lowest_eigenvalue) {}

    double lowest;  // lowest eigenvalue of the shifted operator
};

// Iterative solver failed to reach the requested residual.
class SolverError : public std::runtime_error {
public:
    SolverError(const std::string& what, double best_residual, int iterations)
        : std::runtime_error(what), residual(best_residual), iters(iterations) {}

    double residual;
    int iters;
};

// Config file rejection; carries the offending line when known.
class ConfigError : public std::runtime_error {
public:
    explicit ConfigError(const std::string& what, int line = -1)
        : std::runtime_error(line >= 0 ? "line " + std::to_string(line) + ": " + what : what),
          line_number(line) {}

    int line_number;
};

}  // namespace fiberspec
