#pragma once

#include <stdexcept>
#include <string>

namespace aoi {

/// Raised when a model, parameter set, or configuration violates one of its
/// documented preconditions. The message names the first violated rule.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

/// Raised when a numeric routine cannot reach its tolerance (singular system,
/// iteration cap exceeded). The message carries the last residuals seen.
struct SolverError : std::runtime_error {
  explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace aoi
