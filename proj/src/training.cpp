#include "tmm/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "tmm/errors.hpp"
#include "tmm/logspace.hpp"
#include "tmm/parallel.hpp"

namespace tmm {

namespace {

// Examples per gradient shard. Shards are summed in index order, so results
// do not depend on the number of worker threads.
constexpr std::size_t kShard = 8;
constexpr std::size_t kDivergencePatience = 10;

double regularizer(const Network& net, double lambda) {
  if (lambda == 0.0) return 0.0;
  double acc = 0.0;
  for (const LevelWeights* b : net.params().blocks())
    for (double c : b->log_w) acc += std::exp(2.0 * c);
  return lambda * acc;
}

struct ExampleResult {
  double discriminative = 0.0;
  double generative = 0.0;
};

// Forward (and optionally reverse) pass for a single example with the logit
// gradient of the per-example loss scaled by `weight`.
ExampleResult run_example(const CompiledNetwork& compiled, const MaskedInstance& x, std::size_t label, double beta,
                          double weight, const ForwardOptions& options, GradientTape* tape) {
  CompiledNetwork::Trace trace;
  const std::vector<double> logits = compiled.forward(x, options, tape != nullptr ? &trace : nullptr);
  if (label >= logits.size()) throw Error("label " + std::to_string(label) + " outside the class range");
  const double lse = logsumexp(logits);
  ExampleResult r;
  r.discriminative = lse - logits[label];
  r.generative = -lse;
  if (tape != nullptr) {
    if (!std::isfinite(lse) || !std::isfinite(r.discriminative)) {
      throw Error("loss is not finite; cannot differentiate");
    }
    std::vector<double> g(logits.size());
    for (std::size_t y = 0; y < logits.size(); ++y) {
      const double p = std::exp(logits[y] - lse);
      g[y] = weight * ((1.0 - beta) * p - (y == label ? 1.0 : 0.0));
    }
    compiled.backward(x, trace, g, options, *tape);
  }
  return r;
}

// Loss over the selected examples and, when `grad` is set, its gradient.
// `schedules` may be empty (no random marginalization).
LossTerms evaluate(const Network& net, const Dataset& data, std::span<const std::size_t> batch, const TrainConfig& cfg,
                   std::span<const MarginalizationSchedule> schedules, GradientTape* grad) {
  if (batch.empty()) throw Error("empty batch");
  const CompiledNetwork compiled(net);
  const std::size_t n = batch.size();
  const double inv = 1.0 / static_cast<double>(n);
  const std::size_t shards = (n + kShard - 1) / kShard;
  std::vector<double> disc(n), gen(n);
  std::vector<GradientTape> tapes(grad != nullptr ? shards : 0);
  parallel_for(shards, cfg.threads, [&](std::size_t s) {
    GradientTape* tape = nullptr;
    if (grad != nullptr) {
      tapes[s] = net.make_tape();
      tape = &tapes[s];
    }
    for (std::size_t k = s * kShard; k < std::min(n, (s + 1) * kShard); ++k) {
      ForwardOptions opts;
      if (!schedules.empty()) opts.schedule = &schedules[k];
      const std::size_t i = batch[k];
      const ExampleResult r = run_example(compiled, data.instances[i], data.labels[i], cfg.beta, inv, opts, tape);
      disc[k] = r.discriminative;
      gen[k] = r.generative;
    }
  });

  LossTerms terms;
  for (std::size_t k = 0; k < n; ++k) {
    terms.discriminative += disc[k];
    terms.generative += gen[k];
  }
  terms.discriminative *= inv;
  terms.generative *= inv;
  terms.regularization = regularizer(net, cfg.lambda);
  terms.total = terms.discriminative + cfg.beta * terms.generative + terms.regularization;

  if (grad != nullptr) {
    *grad = net.make_tape();
    for (const auto& t : tapes) *grad += t;
    if (cfg.lambda != 0.0) {
      const auto blocks = net.params().blocks();
      for (std::size_t b = 0; b < blocks.size(); ++b)
        for (std::size_t k = 0; k < blocks[b]->log_w.size(); ++k)
          grad->weights[b][k] += 2.0 * cfg.lambda * std::exp(2.0 * blocks[b]->log_w[k]);
    }
  }
  return terms;
}

std::vector<std::size_t> all_indices(std::size_t n) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  return idx;
}

bool finite_tape(const GradientTape& t) {
  for (const auto& b : t.weights)
    for (double v : b)
      if (!std::isfinite(v)) return false;
  for (const auto& b : t.components)
    for (double v : b)
      if (!std::isfinite(v)) return false;
  return true;
}

void update_block(std::span<double> param, const std::vector<double>& g, std::vector<double>& m, std::vector<double>& v,
                  const TrainConfig& cfg, double lr, std::size_t t) {
  if (cfg.optimizer == OptimizerKind::adam) {
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t k = 0; k < param.size(); ++k) {
      m[k] = cfg.beta1 * m[k] + (1.0 - cfg.beta1) * g[k];
      v[k] = cfg.beta2 * v[k] + (1.0 - cfg.beta2) * g[k] * g[k];
      param[k] -= lr * (m[k] / c1) / (std::sqrt(v[k] / c2) + cfg.epsilon);
    }
  } else {
    for (std::size_t k = 0; k < param.size(); ++k) {
      m[k] = cfg.momentum * m[k] + g[k];
      param[k] -= lr * m[k];
    }
  }
}

}  // namespace

void TrainConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be a finite value >= 0");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) throw ConfigError("lambda must be a finite value >= 0");
  if (!(learning_rate >= 0.0) || !std::isfinite(learning_rate)) throw ConfigError("learning rate must be >= 0");
  if (milestones.size() != factors.size()) throw ConfigError("milestones and factors differ in length");
  if (!std::is_sorted(milestones.begin(), milestones.end())) throw ConfigError("milestones must be increasing");
  for (double f : factors)
    if (!(f > 0.0) || !std::isfinite(f)) throw ConfigError("learning-rate factors must be positive");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) throw ConfigError("Adam moments must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ConfigError("epsilon must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0, 1)");
  if (batch_size == 0) throw ConfigError("batch size must be positive");
  if (threads == 0) throw ConfigError("thread count must be positive");
  for (double r : marginalization_rates)
    if (!(r >= 0.0 && r < 1.0)) throw ConfigError("marginalization rates must lie in [0, 1)");
}

double TrainConfig::learning_rate_at(std::size_t iteration) const {
  double lr = learning_rate;
  for (std::size_t k = 0; k < milestones.size(); ++k)
    if (iteration >= milestones[k]) lr *= factors[k];
  return lr;
}

LossTerms loss(const Network& net, const Dataset& batch, const TrainConfig& cfg) {
  const auto idx = all_indices(batch.size());
  return evaluate(net, batch, idx, cfg, {}, nullptr);
}

GradientTape backward(const Network& net, const Dataset& batch, const TrainConfig& cfg) {
  const auto idx = all_indices(batch.size());
  GradientTape grad;
  const LossTerms terms = evaluate(net, batch, idx, cfg, {}, &grad);
  if (!std::isfinite(terms.total)) throw Error("loss is not finite; cannot differentiate");
  return grad;
}

void step(Network& net, const GradientTape& grad, OptimizerState& state, const TrainConfig& cfg, double learning_rate) {
  if (state.first.weights.empty() && state.first.components.empty()) {
    state.first = net.make_tape();
    state.second = net.make_tape();
  }
  auto blocks = net.params().blocks();
  auto comp = net.components().parameter_blocks();
  if (grad.weights.size() != blocks.size() || grad.components.size() != comp.size()) {
    throw ShapeError("gradient tape does not match the network");
  }
  ++state.steps;
  for (std::size_t b = 0; b < blocks.size(); ++b) {
    if (grad.weights[b].size() != blocks[b]->log_w.size()) throw ShapeError("gradient tape does not match the network");
    update_block(blocks[b]->log_w, grad.weights[b], state.first.weights[b], state.second.weights[b], cfg, learning_rate,
                 state.steps);
  }
  for (std::size_t b = 0; b < comp.size(); ++b) {
    if (grad.components[b].size() != comp[b].size()) throw ShapeError("gradient tape does not match the network");
    update_block(comp[b], grad.components[b], state.first.components[b], state.second.components[b], cfg,
                 learning_rate, state.steps);
  }
  net.normalize();
}

std::vector<TraceRow> train(Network& net, const Dataset& data, const TrainConfig& cfg,
                            const IterationCallback& on_iteration) {
  cfg.validate();
  if (data.empty()) throw Error("training set is empty");
  if (data.labels.size() != data.size()) throw ShapeError("dataset labels do not match instances");
  for (std::size_t y : data.labels)
    if (y >= net.classes()) throw Error("label " + std::to_string(y) + " outside the class range");

  const Rng root(cfg.seed);
  const Rng order_root = root.derive(1);
  const Rng mask_root = root.derive(2);
  std::vector<std::size_t> order = all_indices(data.size());
  std::size_t cursor = order.size();
  std::size_t epoch = 0;

  OptimizerState state;
  std::vector<TraceRow> trace;
  trace.reserve(cfg.iterations);
  std::size_t bad = 0;
  const bool marginalize = std::any_of(cfg.marginalization_rates.begin(), cfg.marginalization_rates.end(),
                                       [](double r) { return r > 0.0; });

  for (std::size_t it = 0; it < cfg.iterations; ++it) {
    std::vector<std::size_t> batch(cfg.batch_size);
    for (auto& b : batch) {
      if (cursor == order.size()) {
        Rng shuffle = order_root.derive(epoch++);
        for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[shuffle.uniform_int(k)]);
        cursor = 0;
      }
      b = order[cursor++];
    }

    std::vector<MarginalizationSchedule> schedules;
    if (marginalize) {
      const Rng it_rng = mask_root.derive(it);
      schedules.reserve(batch.size());
      for (std::size_t k = 0; k < batch.size(); ++k) {
        Rng r = it_rng.derive(k);
        schedules.push_back(random_marginalization(net.topology(), cfg.marginalization_rates, r));
      }
    }

    GradientTape grad;
    LossTerms terms;
    bool ok = true;
    try {
      terms = evaluate(net, data, batch, cfg, schedules, &grad);
      ok = std::isfinite(terms.total) && finite_tape(grad);
    } catch (const Error&) {
      terms = evaluate(net, data, batch, cfg, schedules, nullptr);
      ok = false;
    }
    trace.push_back({it, terms.total, terms.discriminative, terms.generative});
    if (!ok) {
      if (++bad >= kDivergencePatience) {
        throw DivergenceError("loss not finite for " + std::to_string(bad) + " consecutive iterations");
      }
    } else {
      bad = 0;
      step(net, grad, state, cfg, cfg.learning_rate_at(it));
    }
    if (on_iteration) on_iteration(it, net);
  }
  return trace;
}

void init_components_from_data(ComponentFamily& family, const Dataset& data, Rng& rng) {
  if (data.empty()) throw Error("cannot initialize components from an empty dataset");
  const std::size_t s = family.dim();
  const std::size_t m = family.count();
  for (const auto& x : data.instances)
    if (x.dim != s) throw ShapeError("dataset patch size does not match the component dimension");

  if (family.kind() == ComponentKind::diagonal_gaussian) {
    std::vector<double> sum(s, 0.0), sq(s, 0.0), cnt(s, 0.0);
    for (const auto& x : data.instances)
      for (std::size_t k = 0; k < x.values.size(); ++k)
        if (x.observed[k]) {
          const std::size_t c = k % s;
          sum[c] += x.values[k];
          sq[c] += x.values[k] * x.values[k];
          cnt[c] += 1.0;
        }
    std::vector<double> mean(s, 0.0), var(s, 1.0);
    for (std::size_t c = 0; c < s; ++c) {
      if (cnt[c] == 0.0) continue;
      mean[c] = sum[c] / cnt[c];
      var[c] = std::max(sq[c] / cnt[c] - mean[c] * mean[c], 1e-2);
    }
    for (std::size_t d = 0; d < m; ++d) {
      const auto& x = data.instances[rng.uniform_int(data.size())];
      const std::size_t i = rng.uniform_int(x.positions);
      const auto patch = x.patch(i);
      const auto mask = x.patch_mask(i);
      for (std::size_t c = 0; c < s; ++c) {
        const double base = mask[c] ? patch[c] : mean[c];
        family.set_mean(d, c, base + 0.1 * std::sqrt(var[c]) * rng.normal());
        family.set_variance(d, c, var[c] + kVarianceFloor);
      }
    }
    return;
  }

  const std::size_t v = family.alphabet();
  std::vector<double> counts(s * v, 1.0);
  for (const auto& x : data.instances)
    for (std::size_t k = 0; k < x.values.size(); ++k)
      if (x.observed[k]) {
        const double sym = x.values[k];
        if (sym >= 0.0 && sym < static_cast<double>(v) && sym == std::floor(sym)) {
          counts[(k % s) * v + static_cast<std::size_t>(sym)] += 1.0;
        }
      }
  std::vector<double> probs(v);
  for (std::size_t d = 0; d < m; ++d)
    for (std::size_t c = 0; c < s; ++c) {
      double total = 0.0;
      for (std::size_t a = 0; a < v; ++a) {
        probs[a] = counts[c * v + a] * std::exp(0.5 * rng.normal());
        total += probs[a];
      }
      for (double& p : probs) p /= total;
      family.set_probs(d, c, probs);
    }
}

void write_loss_csv(std::ostream& out, const std::vector<TraceRow>& trace) {
  out << "# tmmkit-csv v1\n";
  out << "iteration,loss,discriminative,generative\n";
  const auto old = out.precision(17);
  for (const auto& row : trace) {
    out << row.iteration << ',' << row.loss << ',' << row.discriminative << ',' << row.generative << '\n';
  }
  out.precision(old);
}

}  // namespace tmm
