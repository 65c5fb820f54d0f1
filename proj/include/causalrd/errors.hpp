#pragma once

#include <stdexcept>
#include <string>

namespace causalrd {

// A dense table would exceed the configured entry budget.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A normalizer vanished because the output marginal puts no mass where the
// tilt needs it.
class DegenerateMarginalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Closed-form rate and directed information disagree at a claimed fixed point.
class ConsistencyError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An inner fixed-point solve hit max_sweeps during a multiplier search.
class NonConvergenceError : public std::runtime_error {
 public:
  NonConvergenceError(const std::string& what, double s) : std::runtime_error(what), s_(s) {}
  double s() const noexcept { return s_; }

 private:
  double s_;
};

// Input tables failed probability validation; what() lists every violation.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace causalrd
