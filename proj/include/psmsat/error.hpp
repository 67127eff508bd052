#pragma once

#include <stdexcept>
#include <string>

namespace psmsat {

/// A closed-form quantity left its admissible range (a rate outside (0,1],
/// a non-positive renewal denominator). Never clamped.
class ModelBreakdown : public std::runtime_error {
 public:
  explicit ModelBreakdown(const std::string& what) : std::runtime_error("model breakdown: " + what) {}
};

class ConvergenceError : public std::runtime_error {
 public:
  explicit ConvergenceError(const std::string& what) : std::runtime_error("no convergence: " + what) {}
};

/// Bad parameters or configuration. Messages name the offending key.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

}  // namespace psmsat
