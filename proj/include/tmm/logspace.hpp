#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace tmm {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// log(sum(exp(v))) with max-shift; all -inf (or empty) gives -inf.
inline double logsumexp(std::span<const double> v) {
  double hi = -kInf;
  for (double x : v) hi = std::max(hi, x);
  if (hi == -kInf) return -kInf;
  if (hi == kInf) return kInf;
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - hi);
  return hi + std::log(acc);
}

inline double logaddexp(double a, double b) {
  if (a == -kInf) return b;
  if (b == -kInf) return a;
  const double hi = std::max(a, b);
  return hi + std::log1p(std::exp(-std::abs(a - b)));
}

inline double softplus(double x) { return x > 30.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }

/// Inverse of softplus for y > 0.
inline double softplus_inverse(double y) { return y > 30.0 ? y + std::log(-std::expm1(-y)) : std::log(std::expm1(y)); }

inline double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace tmm
