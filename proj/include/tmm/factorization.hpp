#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "tmm/rng.hpp"
#include "tmm/tensor.hpp"

namespace tmm {

/// How the weight vectors of one level are tied across spatial positions.
enum class Sharing {
  unshared,  ///< one set of vectors per position
  shared,    ///< a^{l,j,γ} ≡ a^{l,γ}
  window,    ///< tied by position inside the following pooling window
};

/// Non-overlapping product-pooling window, in positions of the level grid.
struct PoolWindow {
  std::size_t height = 1;
  std::size_t width = 2;

  [[nodiscard]] std::size_t size() const { return height * width; }
  friend bool operator==(const PoolWindow&, const PoolWindow&) = default;
};

/// One hidden layer: a 1x1 weighted sum to `width` channels, then pooling.
struct LevelSpec {
  std::size_t width = 1;
  Sharing sharing = Sharing::unshared;
  PoolWindow pool;

  friend bool operator==(const LevelSpec&, const LevelSpec&) = default;
};

/// Spatial structure of a factorized prior over a grid of patches.
///
/// Level l consumes a grid of extent level_height(l) x level_width(l); its
/// pooling window must tile that grid, and after the last level exactly one
/// position remains. Sequences use a grid of height 1.
struct Topology {
  std::size_t grid_height = 1;
  std::size_t grid_width = 1;
  std::vector<LevelSpec> levels;
  std::size_t classes = 1;

  /// Number of patches N.
  [[nodiscard]] std::size_t positions() const { return grid_height * grid_width; }
  [[nodiscard]] std::size_t depth() const { return levels.size(); }
  [[nodiscard]] std::size_t level_height(std::size_t l) const;
  [[nodiscard]] std::size_t level_width(std::size_t l) const;
  [[nodiscard]] std::size_t level_positions(std::size_t l) const { return level_height(l) * level_width(l); }
  /// Distinct weight-vector sets at level l.
  [[nodiscard]] std::size_t slots(std::size_t l) const;
  /// Weight-vector set used by row-major position j of level l.
  [[nodiscard]] std::size_t slot(std::size_t l, std::size_t j) const;
  /// Row-major positions of level l that pool into position p of level l+1, in window row-major order.
  [[nodiscard]] std::vector<std::size_t> children(std::size_t l, std::size_t p) const;

  /// Throws ShapeError when extents do not tile or the list is empty.
  void validate() const;

  friend bool operator==(const Topology&, const Topology&) = default;
};

/// Topology of a binary (or w-ary) tree over a sequence of w^levels patches.
Topology sequence_topology(std::size_t arity, std::vector<std::size_t> ranks, std::size_t classes,
                           Sharing sharing = Sharing::unshared);
/// Single level pooling the whole grid at once: the shallow (CP) network.
Topology cp_topology(std::size_t grid_height, std::size_t grid_width, std::size_t rank, std::size_t classes,
                     bool shared = false);

/// Log-space weight vectors of one level, laid out [slot][out][in].
struct LevelWeights {
  std::size_t slots = 0;
  std::size_t out = 0;
  std::size_t in = 0;
  std::vector<double> log_w;

  LevelWeights() = default;
  LevelWeights(std::size_t s, std::size_t o, std::size_t i) : slots(s), out(o), in(i), log_w(s * o * i, 0.0) {}

  [[nodiscard]] std::span<const double> vec(std::size_t slot, std::size_t gamma) const {
    return {log_w.data() + (slot * out + gamma) * in, in};
  }
  std::span<double> vec(std::size_t slot, std::size_t gamma) { return {log_w.data() + (slot * out + gamma) * in, in}; }

  friend bool operator==(const LevelWeights&, const LevelWeights&) = default;
};

/// Hierarchical (HT) parameters; a CP decomposition is the one-level case.
///
/// levels[l] holds a^{l,j,γ} ∈ R^{r_{l-1}} (r_{-1} = M), and `top` holds
/// the per-class vector over r_{L-1} channels as a single slot with K outputs.
struct HTParams {
  Topology topology;
  std::size_t components = 0;
  std::vector<LevelWeights> levels;
  LevelWeights top;

  /// All weights uniform on their simplex.
  static HTParams uniform(const Topology& topology, std::size_t components);
  /// Offsets i.i.d. standard normal, then normalized.
  static HTParams random(const Topology& topology, std::size_t components, Rng& rng);

  /// Every weight block in order (levels..., top).
  std::vector<LevelWeights*> blocks();
  [[nodiscard]] std::vector<const LevelWeights*> blocks() const;

  void normalize();
  /// Largest |logsumexp - 0| over all weight vectors.
  [[nodiscard]] double normalization_error() const;

  friend bool operator==(const HTParams&, const HTParams&) = default;
};

/// Rank-Z CP parameters over N positions with K per-class top vectors.
struct CPParams {
  std::size_t positions = 0;
  std::size_t components = 0;
  std::size_t rank = 0;
  std::size_t classes = 1;
  bool shared = false;
  std::vector<double> log_top;      ///< [y][z]
  std::vector<double> log_factors;  ///< [slot][z][d], slot = position unless shared

  static CPParams random(std::size_t positions, std::size_t components, std::size_t rank, std::size_t classes,
                         bool shared, Rng& rng);

  [[nodiscard]] std::span<const double> top(std::size_t y) const { return {log_top.data() + y * rank, rank}; }
  [[nodiscard]] std::span<const double> factor(std::size_t z, std::size_t i) const {
    const std::size_t slot = shared ? 0 : i;
    return {log_factors.data() + (slot * rank + z) * components, components};
  }
};

/// CP parameters placed on a grid as a single pooling level.
HTParams to_ht(const CPParams& cp, std::size_t grid_height, std::size_t grid_width);
HTParams to_ht(const CPParams& cp);

/// Dense prior tensor of class y; mode i is patch i in row-major order.
DenseTensor expand_cp(const CPParams& p, std::size_t y, std::size_t budget = kDefaultElementBudget);
DenseTensor expand_ht(const HTParams& p, std::size_t y, std::size_t budget = kDefaultElementBudget);

/// Sparse prior realizing a diagonal GMM with K composite components over N
/// patches: entry w_k at d_i = N·k + i (0-based), zero elsewhere; M = N·K.
DenseTensor gmm_sparse_prior(std::span<const double> weights, std::size_t positions,
                             std::size_t budget = kDefaultElementBudget);

/// The same sparse prior as rank-K CP parameters with one-hot factors.
CPParams gmm_cp_params(std::span<const double> weights, std::size_t positions);

/// Subtracts logsumexp so that the exponentials lie on the simplex.
std::vector<double> normalize_to_simplex(std::span<const double> log_weights);

/// In-place variant for contiguous groups of `group` entries.
void normalize_groups(std::span<double> log_weights, std::size_t group);

}  // namespace tmm
