#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "tmm/inference.hpp"
#include "tmm/instance.hpp"
#include "tmm/network.hpp"
#include "tmm/rng.hpp"
#include "tmm/sampling.hpp"
#include "tmm/training.hpp"

/// Slow, independent reference computations used to check the network.
namespace tmm::oracle {

enum class Family { gaussian, categorical };

struct RandomNetSpec {
  bool deep = true;              ///< HT when true, CP otherwise
  std::size_t grid_height = 1;
  std::size_t grid_width = 4;
  std::size_t arity = 2;         ///< HT: pooling window is 1 x arity on strips, 2 x 2 on square grids
  std::size_t components = 2;
  std::size_t rank = 2;          ///< every hidden width
  std::size_t classes = 2;
  Sharing sharing = Sharing::unshared;
  Family family = Family::categorical;
  std::size_t dim = 1;
  std::size_t alphabet = 2;
  double mean_range = 1.0;       ///< Gaussian means uniform in [-r, r]
  double min_variance = 0.5;
  double max_variance = 2.0;
};

Topology random_topology(const RandomNetSpec& spec);
ComponentFamily random_family(const RandomNetSpec& spec, Rng& rng);
Network random_network(const RandomNetSpec& spec, Rng& rng);

/// Values drawn from the family's support; each coordinate missing with probability `missing`.
MaskedInstance random_instance(const Network& net, double missing, Rng& rng);

/// log P(observed coordinates of a patch | d) straight from the density formulas.
double patch_log_density(const ComponentFamily& f, std::size_t d, std::span<const double> x,
                         std::span<const std::uint8_t> observed);

/// log Σ_{d_1..d_N} A^y_{d_1..d_N} Π_i P(x_i | d_i) with the dense prior tensor.
double dense_log_likelihood(const Network& net, const MaskedInstance& x, std::size_t y);

/// log Σ over all completions of the missing categorical coordinates of exp(forward).
double completion_log_likelihood(const Network& net, const MaskedInstance& x, std::size_t y);

/// n-point Gauss–Hermite rule for ∫ e^{-u²} f(u) du.
struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};
Quadrature gauss_hermite(std::size_t n);

/// log ∫ exp(forward(x with coordinate `coord` observed at t)) dt by 64-point
/// Gauss–Hermite, centered on the component means of that coordinate.
double quadrature_log_likelihood(const Network& net, const MaskedInstance& x, std::size_t coord, std::size_t y);

/// |exp(a - b) - 1|: relative error between two log-domain values.
double log_rel_error(double a, double b);

struct GradientProbe {
  bool component = false;  ///< component block when true, weight block otherwise
  std::size_t block = 0;
  std::size_t index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double rel_error = 0.0;
};

/// Central differences of loss() against backward() at `probes` random parameters.
/// Relative error is |a - n| / max(|a|, |n|, 1e-6).
std::vector<GradientProbe> gradient_check(const Network& net, const Dataset& batch, const TrainConfig& cfg,
                                          std::size_t probes, Rng& rng, double h = 1e-4);

struct ChiSquare {
  double statistic = 0.0;
  std::size_t dof = 0;
  double p_value = 1.0;
};

/// Draws `samples` instances of class y and tests their counts against
/// exp(forward) over every complete categorical input; cells with expected
/// count below 5 are pooled.
ChiSquare sampling_chi_square(const Network& net, std::size_t y, std::size_t samples, Rng& rng);

/// Upper tail P(χ²_dof ≥ statistic).
double chi_square_p_value(double statistic, std::size_t dof);

/// Exhaustive max-product search over every channel assignment below a neuron.
struct ExactAssignment {
  double log_score = 0.0;             ///< Σ of chosen log-weights
  std::vector<std::size_t> leaves;    ///< component per receptive-field patch, row-major
};
ExactAssignment exhaustive_assignment(const Network& net, const NeuronRef& neuron);

/// Σ of log-weights along the greedy descent, recomputed independently.
double greedy_log_score(const Network& net, const NeuronRef& neuron);

/// Random HT prior with N = 4, binary pooling and M = r = 2; returns the
/// numeric rank of its odd/even matricization.
std::size_t depth_efficiency_rank(Rng& rng);

/// Random diagonal GMM encoded with the sparse prior; returns the relative
/// error between the network and the direct mixture formula.
double gmm_equivalence_error(std::size_t k, std::size_t n, std::size_t s, Rng& rng);

/// Finite joint over n categorical variables and K classes, used to evaluate
/// prediction rules by full enumeration.
struct ToyJoint {
  std::size_t variables = 0;
  std::size_t alphabet = 2;
  std::size_t classes = 2;
  std::vector<double> probs;  ///< [x index][y], x index row-major over variables

  [[nodiscard]] std::size_t inputs() const;
  [[nodiscard]] std::vector<std::size_t> decode(std::size_t index) const;
};

/// Joint P(x, y) = prior_y · exp(dense log-likelihood) of a categorical network with s = 1.
ToyJoint joint_from_network(const Network& net, const ClassPrior& prior);

/// Mask distribution Q(m | x): probability of each observation mask (bit i
/// set = variable i observed) given the input index.
using MaskDistribution = std::function<double(std::size_t mask, std::size_t x)>;

/// argmax_y P(y | o(x, m)) from the joint.
std::size_t marginalized_bayes(const ToyJoint& j, std::size_t x, std::size_t mask);
/// argmax_y P(M = m | o(x, m), y) P(y | o(x, m)): optimal under any Q.
std::size_t general_optimal(const ToyJoint& j, const MaskDistribution& q, std::size_t x, std::size_t mask);

enum class Imputation { zero, mean, most_likely };
/// Bayes prediction on the completed input.
std::size_t imputed_bayes(const ToyJoint& j, Imputation method, std::size_t x, std::size_t mask);

/// E over (x, y, m) of [rule(x, m) == y].
double expected_accuracy(const ToyJoint& j, const MaskDistribution& q,
                         const std::function<std::size_t(std::size_t x, std::size_t mask)>& rule);

/// Outcome of a suite of checks.
struct SuiteReport {
  std::string name;
  bool passed = false;
  std::size_t trials = 0;
  std::size_t failures = 0;
  double max_rel_err = 0.0;
  std::string detail;
};

SuiteReport forward_equivalence_suite(std::size_t trials, std::uint64_t seed);
SuiteReport marginalization_suite(std::size_t trials, std::uint64_t seed);
SuiteReport gradient_suite(std::size_t probes, std::uint64_t seed);
SuiteReport depth_efficiency_suite(std::size_t trials, std::uint64_t seed);
SuiteReport gmm_suite(std::size_t trials, std::uint64_t seed);
SuiteReport sampling_suite(std::size_t models, std::size_t samples, std::uint64_t seed);
SuiteReport imputation_gap_suite();
/// Every weight vector and categorical table on its simplex; with a small
/// enough model also checks that each class prior tensor sums to one.
SuiteReport simplex_suite(const Network& net);

/// One line per suite: name, PASS/FAIL, trials, failures, max_rel_err, detail.
std::string format_report(const SuiteReport& r);

}  // namespace tmm::oracle
