#pragma once

#include <stdexcept>
#include <string>

// Failure taxonomy.  The CLI maps these to exit codes: configuration
// problems -> 2, numerical failures -> 3, physics-regime violations -> 4.

namespace peit {

// Bad user input: malformed config, unknown keys, out-of-range values.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid arguments at the library level (negative dimensions, empty grids).
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Requested Hilbert space exceeds the configured cap.
struct DimensionCapExceeded : ConfigError {
  using ConfigError::ConfigError;
};

// Iterative solver failed to reach its residual target.
struct SolverFailure : std::runtime_error {
  double residual;
  SolverFailure(const std::string& what, double res)
      : std::runtime_error(what + " (residual " + std::to_string(res) + ")"),
        residual(res) {}
};

// Integration accuracy contract broken (trace or norm drift past tolerance).
struct IntegrationAccuracyError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Steady state is not unique; an expectation value there is meaningless.
struct SteadyStateAmbiguity : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Rate expressions evaluated on a pole of the response function.
struct PoleError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Linear chain is not the stable configuration (zigzag threshold crossed).
struct StructuralInstability : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Parameters place the system outside the regime the quantity assumes,
// e.g. a cooling rate that comes out as heating.
struct RegimeViolation : std::runtime_error {
  using std::runtime_error::runtime_error;
};

} // namespace peit
