#pragma once

#include <stdexcept>
#include <string>

namespace uamsim {

// Error taxonomy used across the toolkit. The CLI maps each family to a
// distinct process exit code (see tools/).

/// Malformed input document: missing field, wrong type, bad schema.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Structurally valid input that violates a domain invariant.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A requested route or service point cannot satisfy the SINR constraint.
struct InfeasibleError : std::runtime_error {
  explicit InfeasibleError(const std::string& msg) : std::runtime_error(msg) {}
};

/// No route exists between feasible endpoints.
struct UnreachableError : InfeasibleError {
  explicit UnreachableError(const std::string& msg) : InfeasibleError(msg) {}
};

/// Operation applied to an object in the wrong state (e.g. stepping a
/// finished episode).
struct StateError : std::logic_error {
  explicit StateError(const std::string& msg) : std::logic_error(msg) {}
};

/// Tensor shape mismatch; message names both shapes.
struct ShapeError : std::logic_error {
  explicit ShapeError(const std::string& msg) : std::logic_error(msg) {}
};

/// Non-finite value produced where a finite one is required.
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Inconsistent configuration (e.g. window size not dividing the map side).
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Filesystem-level failure.
struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace uamsim
