#include "tmm/rng.hpp"

#include <cmath>
#include <numbers>

#include "tmm/errors.hpp"
#include "tmm/logspace.hpp"

namespace tmm {

std::uint64_t Rng::uniform_int(std::uint64_t n) {
  if (n == 0) throw Error("uniform_int: empty range");
  // Rejection keeps the draw exactly uniform.
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t v;
  do {
    v = next();
  } while (v >= limit);
  return v % n;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1;
  do {
    u1 = uniform();
  } while (u1 <= 0.0);
  const double u2 = uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

std::size_t Rng::categorical_log(std::span<const double> log_weights) {
  const double total = logsumexp(log_weights);
  if (!std::isfinite(total)) throw Error("categorical_log: no finite weight");
  const double u = uniform();
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < log_weights.size(); ++i) {
    if (log_weights[i] == -kInf) continue;
    acc += std::exp(log_weights[i] - total);
    last = i;
    if (u < acc) return i;
  }
  return last;
}

std::size_t Rng::categorical(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) total += w;
  if (!(total > 0.0)) throw Error("categorical: weights sum to zero");
  const double u = uniform() * total;
  double acc = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] <= 0.0) continue;
    acc += weights[i];
    last = i;
    if (u < acc) return i;
  }
  return last;
}

}  // namespace tmm
