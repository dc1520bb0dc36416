#pragma once

#include <stdexcept>
#include <string>

namespace fkmc {

/// Invalid or non-finite input to a pure operation.
struct ValidationError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Input violates a mathematical precondition (e.g. a potential that is not
/// nonnegative where the contract requires it).
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};

/// A numeric breakdown during a run: overflow, singular factor, non-finite
/// intermediate.  Carries step/path provenance where known (-1 = unknown).
struct NumericError : std::runtime_error {
  long long step = -1;
  long long path = -1;
  NumericError(const std::string& what, long long step_index = -1,
               long long path_index = -1)
      : std::runtime_error(what), step(step_index), path(path_index) {}
};

/// Operation not supported in the requested configuration.
struct UnsupportedError : std::logic_error {
  using std::logic_error::logic_error;
};

/// Malformed run configuration; message carries the field path.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace fkmc
