#pragma once

#include <stdexcept>
#include <string>

namespace bhc {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Invalid run configuration (bad schedule, bad horizon, empty save list...).
struct ConfigError : Error {
  using Error::Error;
};

/// Domain-object invariant violated (norms, parameter signs, site ranges).
struct ValidationError : Error {
  using Error::Error;
};

/// Syntax error in a configuration file; carries the 1-based line number.
struct ParseError : Error {
  ParseError(int line, const std::string& msg)
      : Error("line " + std::to_string(line) + ": " + msg), line(line) {}
  int line;
};

/// Integration lost the norm constraint or an implicit solve failed.
struct DivergedError : Error {
  using Error::Error;
};

/// Series truncation is not converged at the requested order.
struct ConvergenceError : Error {
  using Error::Error;
};

/// Log-log fit window contains unusable (non-positive or too few) samples.
struct WindowError : Error {
  using Error::Error;
};

/// Quadrature result does not stabilize under mesh refinement.
struct MeshError : Error {
  using Error::Error;
};

}  // namespace bhc
