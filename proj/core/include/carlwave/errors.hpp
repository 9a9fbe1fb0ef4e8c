#pragma once

#include <stdexcept>
#include <string>

namespace carlwave {

/// Raised on malformed or inconsistent run configuration: unknown keys,
/// unparseable values, out-of-range parameters, unreadable input files.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a run produces non-finite values or an unusable discretization
/// (CFL violation detected mid-run, exploding iterates, overflowing weights).
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a requested verification fails (no threshold plateau found,
/// identity gap above tolerance) as opposed to a malformed input.
struct CheckFailure : std::runtime_error {
  explicit CheckFailure(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace carlwave
