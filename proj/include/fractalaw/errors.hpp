#pragma once

#include <stdexcept>
#include <string>

namespace fractalaw {

// Precondition violations throw std::invalid_argument. The types below cover
// the failure classes the CLI maps onto distinct exit codes.

// A configurable resource limit (atom count, LP support size, set capacity)
// would be exceeded.
struct ResourceError : std::runtime_error {
  explicit ResourceError(const std::string& what) : std::runtime_error(what) {}
};

// The contraction hypothesis of an experiment does not hold (or cannot be
// certified), so the experiment refuses to run.
struct HypothesisError : std::domain_error {
  explicit HypothesisError(const std::string& what) : std::domain_error(what) {}
};

// Malformed or inconsistent experiment configuration.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace fractalaw
