#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "tmm/instance.hpp"
#include "tmm/network.hpp"

namespace tmm {

/// Class prior P(Y = y), stored in log space.
struct ClassPrior {
  std::vector<double> log_probs;

  static ClassPrior uniform(std::size_t classes);
  /// Throws Error unless `probs` lies on the simplex.
  static ClassPrior from_probs(std::span<const double> probs);

  [[nodiscard]] std::size_t classes() const { return log_probs.size(); }
};

/// log P(Y = y | o(x, m)) from per-class log-likelihoods. Throws
/// ZeroDensityError when every class has zero density.
std::vector<double> posterior_from_logits(std::span<const double> logits, const ClassPrior& prior);

std::vector<double> class_posterior(const Network& net, const MaskedInstance& x, const ClassPrior& prior);

/// Argmax with ties broken toward the smallest index.
std::size_t argmax(std::span<const double> v);

/// The marginalized Bayes predictor.
std::size_t predict(const Network& net, const MaskedInstance& x, const ClassPrior& prior);

/// Shifted copies of a patchified image; pixels shifted in from outside are missing.
struct TranslationEnsemble {
  bool enabled = false;
  std::size_t grid_height = 0;  ///< patches per column
  std::size_t grid_width = 0;   ///< patches per row
  int radius = 1;               ///< shifts in [-radius, radius]² pixels
};

/// Moves every pixel by (dr, dc) in image coordinates.
MaskedInstance shift_instance(const MaskedInstance& x, std::size_t grid_height, std::size_t grid_width,
                              PatchShape patch, int dr, int dc);

struct BatchOptions {
  std::size_t threads = 1;
  TranslationEnsemble ensemble;
};

/// Log-posteriors of every instance. With the ensemble enabled the posterior
/// is the log of the mean posterior over all shifts.
std::vector<std::vector<double>> batch_posteriors(const Network& net, std::span<const MaskedInstance> xs,
                                                  const ClassPrior& prior, const BatchOptions& options = {});

std::vector<std::size_t> batch_predict(const Network& net, std::span<const MaskedInstance> xs, const ClassPrior& prior,
                                       const BatchOptions& options = {});

/// Fraction of matching labels; 0 for empty input.
double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> labels);

/// Rows: id, mask density, per-class log-posterior, predicted and true label.
void write_prediction_csv(std::ostream& out, std::span<const MaskedInstance> xs,
                          const std::vector<std::vector<double>>& posteriors, std::span<const std::size_t> labels);

struct ImputationGapReport {
  double epsilon = 0.0;
  double marginalized_accuracy = 0.0;
  double unconditional_imputation_accuracy = 0.0;
  double conditional_imputation_accuracy = 0.0;
  double full_observation_accuracy = 0.0;
  /// (2-ε)/3 and (1+ε)/3.
  double closed_form_marginalized = 0.0;
  double closed_form_imputation = 0.0;
};

/// Two binary variables and a binary class where X2 is never observed: the
/// marginalized Bayes predictor reaches (2-ε)/3 while classifying the most
/// likely completion reaches only (1+ε)/3. Evaluated exactly by enumeration
/// through a categorical TMM that encodes the joint. At ε = 0 the completed
/// instances are class ties, which resolve toward class 0.
ImputationGapReport imputation_gap_demo(double epsilon = 1e-4);

/// The categorical TMM used by imputation_gap_demo, with its class prior.
Network imputation_gap_network(double epsilon);
ClassPrior imputation_gap_prior(double epsilon);

}  // namespace tmm
