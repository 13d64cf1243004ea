#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "tmm/components.hpp"
#include "tmm/factorization.hpp"
#include "tmm/instance.hpp"
#include "tmm/rng.hpp"

namespace tmm {

/// Log-space channel values over a grid: values[(row * width + col) * channels + channel].
struct Activation {
  std::size_t height = 0;
  std::size_t width = 0;
  std::size_t channels = 0;
  std::vector<double> values;

  Activation() = default;
  Activation(std::size_t h, std::size_t w, std::size_t c) : height(h), width(w), channels(c), values(h * w * c, 0.0) {}

  [[nodiscard]] std::size_t positions() const { return height * width; }
  [[nodiscard]] std::span<const double> at(std::size_t j) const { return {values.data() + j * channels, channels}; }
  std::span<double> at(std::size_t j) { return {values.data() + j * channels, channels}; }
};

/// Pixel extent of one local structure; s = height * width.
struct PatchShape {
  std::size_t height = 1;
  std::size_t width = 1;

  [[nodiscard]] std::size_t size() const { return height * width; }
  friend bool operator==(const PatchShape&, const PatchShape&) = default;
};

/// Positions whose activations are replaced by zeros (log 1) at the input of
/// each level; zeroed[l][j] applies to position j of level l.
struct MarginalizationSchedule {
  std::vector<std::vector<std::uint8_t>> zeroed;

  [[nodiscard]] bool empty() const { return zeroed.empty(); }
};

struct ForwardOptions {
  /// Subtract the per-position logsumexp before each weighted sum and add it back after.
  bool activation_norm = true;
  const MarginalizationSchedule* schedule = nullptr;
};

/// Gradient buffers shaped like the parameters: one vector per HT block
/// (levels..., top) and one per component block.
struct GradientTape {
  std::vector<std::vector<double>> weights;
  std::vector<std::vector<double>> components;

  GradientTape& operator+=(const GradientTape& other);
  void scale(double factor);
  void zero();
};

/// The compiled log-space ConvAC (SimNet): representation, then per level a
/// 1x1 weighted sum followed by product pooling, then one weighted sum per class.
class Network {
 public:
  Network() = default;
  /// Throws ShapeError when the parameters do not match the component count or topology.
  Network(ComponentFamily components, HTParams params, PatchShape patch);
  /// Patch shape defaults to a 1 x s strip.
  Network(ComponentFamily components, HTParams params);

  [[nodiscard]] const ComponentFamily& components() const { return components_; }
  ComponentFamily& components() { return components_; }
  [[nodiscard]] const HTParams& params() const { return params_; }
  HTParams& params() { return params_; }
  [[nodiscard]] const Topology& topology() const { return params_.topology; }
  [[nodiscard]] PatchShape patch_shape() const { return patch_; }
  [[nodiscard]] std::size_t classes() const { return params_.topology.classes; }
  [[nodiscard]] std::size_t positions() const { return params_.topology.positions(); }
  /// True when the network is the single-level (CP) form.
  [[nodiscard]] bool is_shallow() const { return params_.topology.depth() == 1; }

  /// Zero-filled gradient buffers for this network.
  [[nodiscard]] GradientTape make_tape() const;

  /// rep(i, d) = log P(observed coordinates of x_i | d); 0 for fully missing patches.
  [[nodiscard]] Activation representation(const MaskedInstance& x) const;

  /// N_Θ(x; y) = log P(o(x, m) | Y = y) for every class y.
  [[nodiscard]] std::vector<double> forward(const MaskedInstance& x, const ForwardOptions& options = {}) const;

  /// Largest |logsumexp - 0| across weight vectors and categorical tables.
  [[nodiscard]] double normalization_error() const;
  /// Renormalizes all simplex-constrained parameters.
  void normalize();

  friend bool operator==(const Network&, const Network&) = default;

 private:
  ComponentFamily components_;
  HTParams params_;
  PatchShape patch_;
};

/// Evaluation snapshot of a network: exponentiated weights and component
/// constants are computed once and reused across many instances. Cheap to
/// share read-only between threads; must not outlive the network.
class CompiledNetwork {
 public:
  explicit CompiledNetwork(const Network& net);

  /// Intermediate values kept for the reverse pass.
  struct Trace {
    std::vector<Activation> inputs;    ///< input of level l (after any zeroing); inputs[depth] feeds the class layer
    std::vector<Activation> outputs;   ///< output of the weighted sum at level l
    std::vector<double> logits;
  };

  std::vector<double> forward(const MaskedInstance& x, const ForwardOptions& options = {}, Trace* trace = nullptr) const;

  /// Accumulates d(loss)/d(parameters) into `tape` given d(loss)/d(logits).
  void backward(const MaskedInstance& x, const Trace& trace, std::span<const double> logit_grad,
                const ForwardOptions& options, GradientTape& tape) const;

  [[nodiscard]] Activation representation(const MaskedInstance& x) const;

  [[nodiscard]] const Network& network() const { return *net_; }

 private:
  const Network* net_;
  ComponentEvaluator evaluator_;
  std::vector<std::vector<double>> linear_;  ///< exp(log_w) per block
  std::vector<std::vector<std::size_t>> slot_of_;
};

/// out[j, γ] = logsumexp_α(log_w[slot(j), γ, α] + in[j, α]).
///
/// With `activation_norm` the sum is taken in linear space relative to the
/// per-position logsumexp of the input, falling back to the max-shifted form
/// when the scaled sum underflows. `linear` may carry exp(log_w) to skip the
/// exponentials; it may be empty.
Activation mex_layer(const Activation& in, const LevelWeights& weights, std::span<const std::size_t> slot_of_position,
                     bool activation_norm = true, std::span<const double> linear = {});

/// out[p, γ] = Σ over the window of in[child, γ]: a product of probabilities in log space.
Activation product_pool(const Activation& in, PoolWindow window);

/// Draws positions to marginalize at the input of each level with the
/// per-level probabilities in `rates` (missing entries mean 0).
MarginalizationSchedule random_marginalization(const Topology& topology, std::span<const double> rates, Rng& rng);

/// Instance-level form for the representation layer: marks whole patches
/// missing with probability `rate`.
MaskedInstance apply_random_marginalization(const MaskedInstance& x, double rate, Rng& rng);

/// Dense prior tensor of class y through whichever factorization the network holds.
DenseTensor expand(const Network& net, std::size_t y, std::size_t budget = kDefaultElementBudget);

}  // namespace tmm
