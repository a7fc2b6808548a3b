#pragma once

#include <stdexcept>
#include <string>

namespace convkernel {

// A computation would exceed a configured size/memory/time cap.
class ResourceLimitError : public std::runtime_error {
 public:
  explicit ResourceLimitError(const std::string& what) : std::runtime_error(what) {}
};

// A linear system could not be solved to the required residual.
class SingularSystemError : public std::runtime_error {
 public:
  SingularSystemError(const std::string& what, double condition_estimate)
      : std::runtime_error(what), condition_estimate_(condition_estimate) {}
  double condition_estimate() const { return condition_estimate_; }

 private:
  double condition_estimate_;
};

// Exact integer combinatorics left the representable range.
class NumericOverflowError : public std::runtime_error {
 public:
  explicit NumericOverflowError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace convkernel
