#pragma once

#include <stdexcept>
#include <string>

namespace hhsbp {

/// Invalid user input: unsupported order, malformed topology, bad config.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Vector or matrix sizes that do not agree.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the domain of a function (non-finite potential, x outside a branch).
class DomainError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Divergence, violated gating bounds, step-size limits, failed linear solves.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition of an oracle was not met by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

inline void require_size(std::size_t got, std::size_t want, const char* what) {
  if (got != want) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(want) +
                         ", got " + std::to_string(got));
  }
}

}  // namespace hhsbp
