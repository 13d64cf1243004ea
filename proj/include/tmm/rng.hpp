#pragma once

#include <cstdint>
#include <random>
#include <span>

namespace tmm {

/// Seeded random stream with platform-independent derived distributions.
///
/// The standard library distributions are implementation defined, so the
/// uniform, normal and discrete draws are computed here directly from the
/// 64-bit Mersenne Twister output. Identical seeds give identical streams on
/// every conforming compiler.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : seed_(mix(seed)), engine_(seed_) {}

  /// Independent stream keyed by (this seed, key); does not advance *this.
  [[nodiscard]] Rng derive(std::uint64_t key) const {
    Rng out;
    out.seed_ = mix(seed_ ^ mix(key));
    out.engine_.seed(out.seed_);
    return out;
  }

  std::uint64_t next() { return engine_(); }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n).
  std::uint64_t uniform_int(std::uint64_t n);

  bool bernoulli(double p) { return uniform() < p; }

  double normal();

  /// Index drawn proportionally to exp(log_weights); entries may be -inf.
  std::size_t categorical_log(std::span<const double> log_weights);

  /// Index drawn proportionally to non-negative weights.
  std::size_t categorical(std::span<const double> weights);

 private:
  static std::uint64_t mix(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  std::uint64_t seed_;
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace tmm
