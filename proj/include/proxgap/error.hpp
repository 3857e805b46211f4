#pragma once

#include <stdexcept>
#include <string>

namespace proxgap {

/// Raised when an operation is called outside its documented domain.
class PreconditionError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when a computation produces NaN or infinity.
class NumericalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Raised when an oracle detects results that contradict each other.
class ConsistencyError : public std::logic_error {
public:
  using std::logic_error::logic_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw PreconditionError(message);
}

}  // namespace proxgap
