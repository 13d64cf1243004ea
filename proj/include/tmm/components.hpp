#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tmm/rng.hpp"

namespace tmm {

enum class ComponentKind { diagonal_gaussian, categorical };

/// Lower bound of every Gaussian variance: σ² = kVarianceFloor + softplus(ρ).
inline constexpr double kVarianceFloor = 1e-4;

/// Per-patch mixture components P(x | d; θ_d), shared across all positions.
///
/// Both kinds factorize over the s coordinates of a local structure, which is
/// what makes coordinate-wise marginalization a matter of skipping terms.
/// Gaussian variances are stored through the unconstrained parameter ρ.
/// Categorical tables are stored as log-probabilities, one normalized vector
/// of length V per (component, coordinate). Categorical symbols are encoded
/// as the values 0, 1, ..., V-1.
class ComponentFamily {
 public:
  ComponentFamily() = default;

  /// Means 0, variances 1.
  static ComponentFamily gaussian(std::size_t count, std::size_t dim);
  /// Uniform tables.
  static ComponentFamily categorical(std::size_t count, std::size_t dim, std::size_t alphabet);

  [[nodiscard]] ComponentKind kind() const { return kind_; }
  [[nodiscard]] std::size_t count() const { return count_; }
  [[nodiscard]] std::size_t dim() const { return dim_; }
  [[nodiscard]] std::size_t alphabet() const { return alphabet_; }

  // Gaussian parameters.
  [[nodiscard]] double mean(std::size_t d, std::size_t c) const { return means_[d * dim_ + c]; }
  [[nodiscard]] double variance(std::size_t d, std::size_t c) const;
  void set_mean(std::size_t d, std::size_t c, double mu);
  /// Requires sigma2 > kVarianceFloor.
  void set_variance(std::size_t d, std::size_t c, double sigma2);
  void set_variance_param(std::size_t d, std::size_t c, double rho);

  // Categorical parameters.
  [[nodiscard]] double log_prob(std::size_t d, std::size_t c, std::size_t v) const {
    return log_probs_[(d * dim_ + c) * alphabet_ + v];
  }
  /// Sets the table of (d, c); `probs` must lie on the simplex.
  void set_probs(std::size_t d, std::size_t c, std::span<const double> probs);

  /// Sum of per-coordinate log densities over observed coordinates; 0 when
  /// nothing is observed.
  [[nodiscard]] double log_density(std::size_t d, std::span<const double> x, std::span<const std::uint8_t> observed) const;

  [[nodiscard]] std::vector<double> sample(std::size_t d, Rng& rng) const;

  /// Gaussian mean, or the per-coordinate most likely symbol (lowest on ties).
  [[nodiscard]] std::vector<double> mode(std::size_t d) const;

  /// Raw parameter storage in a fixed order: gaussian {means, ρ}; categorical {log-probs}.
  std::vector<std::span<double>> parameter_blocks();
  [[nodiscard]] std::vector<std::span<const double>> parameter_blocks() const;

  /// Vector length over which each block is simplex-normalized (0 = unconstrained).
  [[nodiscard]] std::vector<std::size_t> simplex_group_sizes() const;

  /// Re-normalizes the categorical tables in log space; no-op for Gaussians.
  void normalize();

  /// Largest |logsumexp - 0| over categorical tables.
  [[nodiscard]] double normalization_error() const;

  friend bool operator==(const ComponentFamily&, const ComponentFamily&) = default;

 private:
  void check_component(std::size_t d) const;

  ComponentKind kind_ = ComponentKind::diagonal_gaussian;
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
  std::size_t alphabet_ = 0;
  std::vector<double> means_;
  std::vector<double> rho_;
  std::vector<double> log_probs_;
};

/// Read-only evaluator with per-(component, coordinate) constants hoisted
/// out of the inner loops. Must not outlive the family it was built from.
class ComponentEvaluator {
 public:
  explicit ComponentEvaluator(const ComponentFamily& family);

  /// out[d] = log P(x observed coords | d) for every component d.
  void log_densities(std::span<const double> x, std::span<const std::uint8_t> observed, std::span<double> out) const;

  /// Accumulates d(loss)/d(parameters) given upstream gradients over the M
  /// outputs of log_densities, into blocks laid out like parameter_blocks().
  void backprop(std::span<const double> x, std::span<const std::uint8_t> observed, std::span<const double> upstream,
                std::vector<std::vector<double>>& grads) const;

 private:
  const ComponentFamily* family_;
  std::vector<double> inv_var_;
  std::vector<double> log_norm_;
  std::vector<double> dvar_drho_;
};

}  // namespace tmm
