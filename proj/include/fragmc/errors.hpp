#pragma once

#include <stdexcept>
#include <string>

namespace fragmc {

/// Invalid measure parameters, malformed experiment configs, and the like.
/// The CLI maps these to exit code 2.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

/// A user-supplied function returned a non-finite value; the message names
/// the offending argument.
class EvaluationError : public std::runtime_error {
 public:
  explicit EvaluationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fragmc
