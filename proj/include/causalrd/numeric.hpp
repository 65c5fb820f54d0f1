#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace causalrd {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(sum_i exp(args[i])), shifted by the largest argument. Entries equal to
// -inf are ignored; an all -inf input yields -inf.
inline double log_sum_exp(std::span<const double> args) {
  double max_arg = kNegInf;
  for (double a : args) max_arg = std::max(max_arg, a);
  if (max_arg == kNegInf) return kNegInf;
  double sum = 0.0;
  for (double a : args) {
    if (a != kNegInf) sum += std::exp(a - max_arg);
  }
  return max_arg + std::log(sum);
}

// x log x with 0 log 0 = 0.
inline double xlogx(double x) { return x > 0.0 ? x * std::log(x) : 0.0; }

// Binary entropy in nats.
inline double binary_entropy(double p) { return -xlogx(p) - xlogx(1.0 - p); }

inline double nats_to_bits(double nats) { return nats / std::log(2.0); }

}  // namespace causalrd
