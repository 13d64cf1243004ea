#include "tmm/network.hpp"

#include <cmath>
#include <string>

#include "tmm/errors.hpp"
#include "tmm/logspace.hpp"

namespace tmm {

namespace {

// Below this, the linear-space sum is recomputed with the max-shifted form.
constexpr double kTinySum = 1e-250;

double exact_mex(std::span<const double> log_w, std::span<const double> x) {
  double hi = -kInf;
  for (std::size_t a = 0; a < x.size(); ++a) hi = std::max(hi, log_w[a] + x[a]);
  if (hi == -kInf || !std::isfinite(hi)) return hi;
  double acc = 0.0;
  for (std::size_t a = 0; a < x.size(); ++a) acc += std::exp(log_w[a] + x[a] - hi);
  return hi + std::log(acc);
}

std::vector<double> exp_all(std::span<const double> v) {
  std::vector<double> out(v.size());
  for (std::size_t k = 0; k < v.size(); ++k) out[k] = std::exp(v[k]);
  return out;
}

// Reverse pass of one weighted-sum layer. Adds parameter gradients to g_w and
// returns the gradient with respect to the layer input.
Activation mex_backward(const Activation& in, const Activation& out, const LevelWeights& weights,
                        std::span<const double> linear, std::span<const std::size_t> slot_of, const Activation& g_out,
                        std::vector<double>& g_w) {
  Activation g_in(in.height, in.width, in.channels);
  std::vector<double> e(in.channels);
  for (std::size_t j = 0; j < in.positions(); ++j) {
    const auto gy = g_out.at(j);
    bool any = false;
    for (double g : gy) any = any || g != 0.0;
    if (!any) continue;
    const auto x = in.at(j);
    const auto y = out.at(j);
    auto gx = g_in.at(j);
    const double n = logsumexp(x);
    if (n == -kInf) continue;
    for (std::size_t a = 0; a < in.channels; ++a) e[a] = std::exp(x[a] - n);
    const std::size_t slot = slot_of[j];
    for (std::size_t gamma = 0; gamma < weights.out; ++gamma) {
      const double g = gy[gamma];
      if (g == 0.0 || y[gamma] == -kInf) continue;
      const std::size_t base = (slot * weights.out + gamma) * weights.in;
      const double s = std::exp(y[gamma] - n);
      if (s > kTinySum && std::isfinite(s)) {
        const double coef = g / s;
        for (std::size_t a = 0; a < in.channels; ++a) {
          const double t = coef * linear[base + a] * e[a];
          gx[a] += t;
          g_w[base + a] += t;
        }
      } else {
        for (std::size_t a = 0; a < in.channels; ++a) {
          const double t = g * std::exp(weights.log_w[base + a] + x[a] - y[gamma]);
          gx[a] += t;
          g_w[base + a] += t;
        }
      }
    }
  }
  return g_in;
}

Activation unpool(const Activation& g_parent, const Activation& child_shape, PoolWindow window) {
  Activation g(child_shape.height, child_shape.width, child_shape.channels);
  for (std::size_t r = 0; r < g.height; ++r)
    for (std::size_t c = 0; c < g.width; ++c) {
      const auto src = g_parent.at((r / window.height) * g_parent.width + c / window.width);
      auto dst = g.at(r * g.width + c);
      std::copy(src.begin(), src.end(), dst.begin());
    }
  return g;
}

void apply_zeroing(Activation& act, const MarginalizationSchedule* schedule, std::size_t level) {
  if (schedule == nullptr || level >= schedule->zeroed.size()) return;
  const auto& z = schedule->zeroed[level];
  if (z.empty()) return;
  if (z.size() != act.positions()) throw ShapeError("marginalization schedule does not match level grid");
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (z[j]) std::fill(act.at(j).begin(), act.at(j).end(), 0.0);
  }
}

}  // namespace

GradientTape& GradientTape::operator+=(const GradientTape& other) {
  for (std::size_t b = 0; b < weights.size(); ++b)
    for (std::size_t k = 0; k < weights[b].size(); ++k) weights[b][k] += other.weights[b][k];
  for (std::size_t b = 0; b < components.size(); ++b)
    for (std::size_t k = 0; k < components[b].size(); ++k) components[b][k] += other.components[b][k];
  return *this;
}

void GradientTape::scale(double factor) {
  for (auto& b : weights)
    for (double& v : b) v *= factor;
  for (auto& b : components)
    for (double& v : b) v *= factor;
}

void GradientTape::zero() { scale(0.0); }

Network::Network(ComponentFamily components, HTParams params, PatchShape patch)
    : components_(std::move(components)), params_(std::move(params)), patch_(patch) {
  params_.topology.validate();
  if (params_.components != components_.count()) {
    throw ShapeError("factorization expects " + std::to_string(params_.components) + " components, family has " +
                     std::to_string(components_.count()));
  }
  if (patch_.size() != components_.dim()) throw ShapeError("patch shape does not match the component dimension");
  const Topology& t = params_.topology;
  if (params_.levels.size() != t.depth()) throw ShapeError("weight levels do not match the topology");
  std::size_t in = components_.count();
  for (std::size_t l = 0; l < t.depth(); ++l) {
    const LevelWeights& w = params_.levels[l];
    if (w.slots != t.slots(l) || w.out != t.levels[l].width || w.in != in || w.log_w.size() != w.slots * w.out * w.in) {
      throw ShapeError("level " + std::to_string(l) + " weights do not match the topology");
    }
    in = w.out;
  }
  if (params_.top.slots != 1 || params_.top.out != t.classes || params_.top.in != in) {
    throw ShapeError("class weights do not match the topology");
  }
}

Network::Network(ComponentFamily components, HTParams params)
    : Network(components, std::move(params), PatchShape{1, components.dim()}) {}

GradientTape Network::make_tape() const {
  GradientTape tape;
  for (const LevelWeights* b : params_.blocks()) tape.weights.emplace_back(b->log_w.size(), 0.0);
  for (const auto& b : components_.parameter_blocks()) tape.components.emplace_back(b.size(), 0.0);
  return tape;
}

Activation Network::representation(const MaskedInstance& x) const { return CompiledNetwork(*this).representation(x); }

std::vector<double> Network::forward(const MaskedInstance& x, const ForwardOptions& options) const {
  return CompiledNetwork(*this).forward(x, options);
}

double Network::normalization_error() const {
  return std::max(params_.normalization_error(), components_.normalization_error());
}

void Network::normalize() {
  params_.normalize();
  components_.normalize();
}

CompiledNetwork::CompiledNetwork(const Network& net) : net_(&net), evaluator_(net.components()) {
  const Topology& t = net.topology();
  for (const LevelWeights* b : net.params().blocks()) linear_.push_back(exp_all(b->log_w));
  for (std::size_t l = 0; l < t.depth(); ++l) {
    std::vector<std::size_t> slots(t.level_positions(l));
    for (std::size_t j = 0; j < slots.size(); ++j) slots[j] = t.slot(l, j);
    slot_of_.push_back(std::move(slots));
  }
  slot_of_.push_back({0});
}

Activation CompiledNetwork::representation(const MaskedInstance& x) const {
  const Network& net = *net_;
  const Topology& t = net.topology();
  x.validate();
  if (x.positions != t.positions() || x.dim != net.components().dim()) {
    throw ShapeError("instance has " + std::to_string(x.positions) + " patches of size " + std::to_string(x.dim) +
                     ", network expects " + std::to_string(t.positions()) + " of size " +
                     std::to_string(net.components().dim()));
  }
  Activation rep(t.grid_height, t.grid_width, net.components().count());
  for (std::size_t j = 0; j < x.positions; ++j) evaluator_.log_densities(x.patch(j), x.patch_mask(j), rep.at(j));
  return rep;
}

std::vector<double> CompiledNetwork::forward(const MaskedInstance& x, const ForwardOptions& options,
                                             Trace* trace) const {
  const Network& net = *net_;
  const Topology& t = net.topology();
  const HTParams& p = net.params();
  if (trace != nullptr) {
    trace->inputs.clear();
    trace->outputs.clear();
  }
  Activation act = representation(x);
  for (std::size_t l = 0; l < t.depth(); ++l) {
    apply_zeroing(act, options.schedule, l);
    Activation out = mex_layer(act, p.levels[l], slot_of_[l], options.activation_norm, linear_[l]);
    Activation pooled = product_pool(out, t.levels[l].pool);
    if (trace != nullptr) {
      trace->inputs.push_back(std::move(act));
      trace->outputs.push_back(std::move(out));
    }
    act = std::move(pooled);
  }
  Activation logits = mex_layer(act, p.top, slot_of_.back(), options.activation_norm, linear_.back());
  if (trace != nullptr) {
    trace->inputs.push_back(std::move(act));
    trace->logits = logits.values;
  }
  return std::move(logits.values);
}

void CompiledNetwork::backward(const MaskedInstance& x, const Trace& trace, std::span<const double> logit_grad,
                               const ForwardOptions& options, GradientTape& tape) const {
  const Network& net = *net_;
  const Topology& t = net.topology();
  const HTParams& p = net.params();
  const std::size_t depth = t.depth();
  if (logit_grad.size() != t.classes) throw ShapeError("logit gradient length does not match the class count");

  Activation g_logits(1, 1, t.classes);
  std::copy(logit_grad.begin(), logit_grad.end(), g_logits.values.begin());
  Activation top_out(1, 1, t.classes);
  top_out.values = trace.logits;
  Activation g = mex_backward(trace.inputs[depth], top_out, p.top, linear_[depth], slot_of_[depth], g_logits,
                              tape.weights[depth]);
  for (std::size_t l = depth; l-- > 0;) {
    const Activation g_out = unpool(g, trace.outputs[l], t.levels[l].pool);
    g = mex_backward(trace.inputs[l], trace.outputs[l], p.levels[l], linear_[l], slot_of_[l], g_out, tape.weights[l]);
    if (options.schedule != nullptr && l < options.schedule->zeroed.size() && !options.schedule->zeroed[l].empty()) {
      const auto& z = options.schedule->zeroed[l];
      for (std::size_t j = 0; j < z.size(); ++j)
        if (z[j]) std::fill(g.at(j).begin(), g.at(j).end(), 0.0);
    }
  }
  for (std::size_t j = 0; j < x.positions; ++j) evaluator_.backprop(x.patch(j), x.patch_mask(j), g.at(j), tape.components);
}

Activation mex_layer(const Activation& in, const LevelWeights& weights, std::span<const std::size_t> slot_of_position,
                     bool activation_norm, std::span<const double> linear) {
  if (weights.in != in.channels) throw ShapeError("weighted sum input width does not match the activation");
  if (slot_of_position.size() != in.positions()) throw ShapeError("slot map does not cover the activation grid");
  std::vector<double> owned;
  if (activation_norm && linear.empty()) {
    owned = exp_all(weights.log_w);
    linear = owned;
  }
  Activation out(in.height, in.width, weights.out);
  std::vector<double> e(in.channels);
  for (std::size_t j = 0; j < in.positions(); ++j) {
    const auto x = in.at(j);
    auto y = out.at(j);
    const std::size_t slot = slot_of_position[j];
    if (slot >= weights.slots) throw ShapeError("slot index out of range");
    if (!activation_norm) {
      for (std::size_t gamma = 0; gamma < weights.out; ++gamma) y[gamma] = exact_mex(weights.vec(slot, gamma), x);
      continue;
    }
    const double n = logsumexp(x);
    if (!std::isfinite(n)) {
      for (std::size_t gamma = 0; gamma < weights.out; ++gamma) y[gamma] = exact_mex(weights.vec(slot, gamma), x);
      continue;
    }
    for (std::size_t a = 0; a < in.channels; ++a) e[a] = std::exp(x[a] - n);
    for (std::size_t gamma = 0; gamma < weights.out; ++gamma) {
      const double* w = linear.data() + (slot * weights.out + gamma) * weights.in;
      double s = 0.0;
      for (std::size_t a = 0; a < in.channels; ++a) s += w[a] * e[a];
      y[gamma] = s > kTinySum ? n + std::log(s) : exact_mex(weights.vec(slot, gamma), x);
    }
  }
  return out;
}

Activation product_pool(const Activation& in, PoolWindow window) {
  if (window.height == 0 || window.width == 0 || in.height % window.height != 0 || in.width % window.width != 0) {
    throw ShapeError("pooling window " + std::to_string(window.height) + "x" + std::to_string(window.width) +
                     " does not divide a " + std::to_string(in.height) + "x" + std::to_string(in.width) + " grid");
  }
  Activation out(in.height / window.height, in.width / window.width, in.channels);
  for (std::size_t r = 0; r < in.height; ++r)
    for (std::size_t c = 0; c < in.width; ++c) {
      const auto src = in.at(r * in.width + c);
      auto dst = out.at((r / window.height) * out.width + c / window.width);
      for (std::size_t k = 0; k < in.channels; ++k) dst[k] += src[k];
    }
  return out;
}

MarginalizationSchedule random_marginalization(const Topology& topology, std::span<const double> rates, Rng& rng) {
  MarginalizationSchedule s;
  for (std::size_t l = 0; l < topology.depth(); ++l) {
    const double rate = l < rates.size() ? rates[l] : 0.0;
    if (!(rate >= 0.0 && rate < 1.0)) throw Error("random marginalization rate must lie in [0, 1)");
    if (rate == 0.0) {
      s.zeroed.emplace_back();
      continue;
    }
    std::vector<std::uint8_t> z(topology.level_positions(l));
    for (auto& v : z) v = rng.bernoulli(rate) ? 1 : 0;
    s.zeroed.push_back(std::move(z));
  }
  return s;
}

MaskedInstance apply_random_marginalization(const MaskedInstance& x, double rate, Rng& rng) {
  if (!(rate >= 0.0 && rate < 1.0)) throw Error("random marginalization rate must lie in [0, 1)");
  MaskedInstance out = x;
  if (rate == 0.0) return out;
  for (std::size_t i = 0; i < x.positions; ++i) {
    if (rng.bernoulli(rate)) std::fill_n(out.observed.begin() + static_cast<std::ptrdiff_t>(i * x.dim), x.dim, 0);
  }
  return out;
}

DenseTensor expand(const Network& net, std::size_t y, std::size_t budget) { return expand_ht(net.params(), y, budget); }

}  // namespace tmm
