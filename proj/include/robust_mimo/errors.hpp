#pragma once

#include <stdexcept>
#include <string>

namespace robust_mimo {

/// Thrown when a caller violates an operation's documented precondition
/// (dimension mismatch, invalid problem parameters, non-Hermitian input, ...).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical routine fails to produce a trustworthy result
/// (iteration cap reached, factorization check failed, solver breakdown).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw PreconditionError(message);
}

}  // namespace robust_mimo
