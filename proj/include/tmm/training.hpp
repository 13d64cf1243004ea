#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

#include "tmm/instance.hpp"
#include "tmm/network.hpp"
#include "tmm/rng.hpp"

namespace tmm {

enum class OptimizerKind { sgd_momentum, adam };

struct TrainConfig {
  /// Weight of the generative term -log Σ_y exp N(x; y).
  double beta = 0.01;
  /// Coefficient of Σ exp(offset)² over all weighted-sum offsets.
  double lambda = 0.0;

  double learning_rate = 0.03;
  /// The rate is multiplied by factors[k] once the iteration reaches milestones[k].
  std::vector<std::size_t> milestones;
  std::vector<double> factors;

  OptimizerKind optimizer = OptimizerKind::adam;
  double beta1 = 0.9;
  double beta2 = 0.9;
  double epsilon = 1e-8;
  double momentum = 0.9;

  std::size_t batch_size = 32;
  std::size_t iterations = 1000;
  /// Probability of marginalizing each position at the input of each level
  /// during training. Values need cross-validation per task; 0.1 per hidden
  /// level is only a starting point.
  std::vector<double> marginalization_rates;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  /// Throws ConfigError on out-of-range settings.
  void validate() const;
  [[nodiscard]] double learning_rate_at(std::size_t iteration) const;
};

struct LossTerms {
  double total = 0.0;
  /// Mean cross-entropy -log P(y | x).
  double discriminative = 0.0;
  /// Mean -log Σ_y exp N(x; y), before the β weight.
  double generative = 0.0;
  double regularization = 0.0;
};

/// Objective on a batch in evaluation mode (no random marginalization).
LossTerms loss(const Network& net, const Dataset& batch, const TrainConfig& cfg);

/// Exact gradient of loss() with respect to the stored offsets and component
/// parameters. Throws Error when the loss is not finite.
GradientTape backward(const Network& net, const Dataset& batch, const TrainConfig& cfg);

struct OptimizerState {
  std::size_t steps = 0;
  GradientTape first;
  GradientTape second;
};

/// One optimizer update followed by renormalization of every simplex vector.
void step(Network& net, const GradientTape& grad, OptimizerState& state, const TrainConfig& cfg, double learning_rate);

struct TraceRow {
  std::size_t iteration = 0;
  double loss = 0.0;
  double discriminative = 0.0;
  double generative = 0.0;
};

/// Called after each iteration; return value is ignored.
using IterationCallback = std::function<void(std::size_t iteration, const Network& net)>;

/// Mini-batch training, deterministic for a fixed config (independent of the
/// thread count). Throws DivergenceError after 10 consecutive non-finite losses.
std::vector<TraceRow> train(Network& net, const Dataset& data, const TrainConfig& cfg,
                            const IterationCallback& on_iteration = {});

/// Gaussian means from random training patches, variances from the pooled
/// per-coordinate variance; categorical tables from smoothed symbol counts.
void init_components_from_data(ComponentFamily& family, const Dataset& data, Rng& rng);

void write_loss_csv(std::ostream& out, const std::vector<TraceRow>& trace);

}  // namespace tmm
