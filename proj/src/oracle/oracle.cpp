#include "tmm/oracle.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/gamma.hpp>

#include "tmm/errors.hpp"
#include "tmm/logspace.hpp"
#include "tmm/tensor.hpp"

namespace tmm::oracle {

namespace {

std::vector<double> random_simplex_log(std::size_t n, Rng& rng) {
  std::vector<double> v(n);
  for (double& x : v) x = rng.normal();
  return normalize_to_simplex(v);
}

double weight_at(const Network& net, std::size_t k, std::size_t j, std::size_t gamma, std::size_t alpha) {
  const HTParams& p = net.params();
  if (k == p.topology.depth()) return p.top.vec(0, gamma)[alpha];
  return p.levels[k].vec(p.topology.slot(k, j), gamma)[alpha];
}

std::size_t input_width(const Network& net, std::size_t k) {
  const HTParams& p = net.params();
  return k == p.topology.depth() ? p.top.in : p.levels[k].in;
}

}  // namespace

Topology random_topology(const RandomNetSpec& spec) {
  const std::size_t n = spec.grid_height * spec.grid_width;
  if (!spec.deep) {
    return cp_topology(spec.grid_height, spec.grid_width, spec.rank, spec.classes, spec.sharing == Sharing::shared);
  }
  if (spec.grid_height == 1) {
    std::vector<std::size_t> ranks;
    std::size_t span = 1;
    while (span < n) {
      span *= spec.arity;
      ranks.push_back(spec.rank);
    }
    if (span != n) throw ShapeError("sequence length is not a power of the arity");
    return sequence_topology(spec.arity, ranks, spec.classes, spec.sharing);
  }
  Topology t;
  t.grid_height = spec.grid_height;
  t.grid_width = spec.grid_width;
  t.classes = spec.classes;
  std::size_t h = spec.grid_height, w = spec.grid_width;
  while (h > 1 || w > 1) {
    const PoolWindow pool{h > 1 ? std::size_t{2} : std::size_t{1}, w > 1 ? std::size_t{2} : std::size_t{1}};
    t.levels.push_back(LevelSpec{spec.rank, spec.sharing, pool});
    h /= pool.height;
    w /= pool.width;
  }
  t.validate();
  return t;
}

ComponentFamily random_family(const RandomNetSpec& spec, Rng& rng) {
  if (spec.family == Family::gaussian) {
    ComponentFamily f = ComponentFamily::gaussian(spec.components, spec.dim);
    for (std::size_t d = 0; d < spec.components; ++d)
      for (std::size_t c = 0; c < spec.dim; ++c) {
        f.set_mean(d, c, spec.mean_range * (2.0 * rng.uniform() - 1.0));
        f.set_variance(d, c, spec.min_variance + (spec.max_variance - spec.min_variance) * rng.uniform());
      }
    return f;
  }
  ComponentFamily f = ComponentFamily::categorical(spec.components, spec.dim, spec.alphabet);
  for (std::size_t d = 0; d < spec.components; ++d)
    for (std::size_t c = 0; c < spec.dim; ++c) {
      const auto log_p = random_simplex_log(spec.alphabet, rng);
      std::vector<double> p(log_p.size());
      double total = 0.0;
      for (std::size_t v = 0; v < p.size(); ++v) total += p[v] = std::exp(log_p[v]);
      for (double& v : p) v /= total;
      f.set_probs(d, c, p);
    }
  return f;
}

Network random_network(const RandomNetSpec& spec, Rng& rng) {
  const Topology t = random_topology(spec);
  ComponentFamily f = random_family(spec, rng);
  HTParams p = HTParams::random(t, spec.components, rng);
  return Network(std::move(f), std::move(p));
}

MaskedInstance random_instance(const Network& net, double missing, Rng& rng) {
  const ComponentFamily& f = net.components();
  MaskedInstance x(net.positions(), f.dim());
  for (std::size_t k = 0; k < x.values.size(); ++k) {
    x.values[k] = f.kind() == ComponentKind::categorical ? static_cast<double>(rng.uniform_int(f.alphabet()))
                                                          : 1.5 * rng.normal();
    x.observed[k] = rng.bernoulli(missing) ? 0 : 1;
  }
  return x;
}

double patch_log_density(const ComponentFamily& f, std::size_t d, std::span<const double> x,
                         std::span<const std::uint8_t> observed) {
  double acc = 0.0;
  for (std::size_t c = 0; c < f.dim(); ++c) {
    if (!observed[c]) continue;
    if (f.kind() == ComponentKind::categorical) {
      acc += f.log_prob(d, c, static_cast<std::size_t>(x[c]));
    } else {
      const double v = f.variance(d, c);
      const double z = x[c] - f.mean(d, c);
      acc += -0.5 * z * z / v - 0.5 * std::log(2.0 * std::numbers::pi * v);
    }
  }
  return acc;
}

double dense_log_likelihood(const Network& net, const MaskedInstance& x, std::size_t y) {
  const DenseTensor a = expand(net, y);
  const std::size_t n = net.positions();
  const std::size_t m = net.components().count();
  std::vector<double> rep(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t d = 0; d < m; ++d) rep[i * m + d] = patch_log_density(net.components(), d, x.patch(i), x.patch_mask(i));

  std::vector<double> terms;
  terms.reserve(a.size());
  std::vector<std::size_t> idx(n, 0);
  const auto entries = a.entries();
  for (std::size_t e = 0; e < entries.size(); ++e) {
    if (entries[e] > 0.0) {
      double t = std::log(entries[e]);
      for (std::size_t i = 0; i < n; ++i) t += rep[i * m + idx[i]];
      terms.push_back(t);
    }
    for (std::size_t i = n; i-- > 0;) {
      if (++idx[i] < m) break;
      idx[i] = 0;
    }
  }
  return logsumexp(terms);
}

double completion_log_likelihood(const Network& net, const MaskedInstance& x, std::size_t y) {
  if (net.components().kind() != ComponentKind::categorical) throw Error("completions need a finite alphabet");
  const std::size_t v = net.components().alphabet();
  std::vector<std::size_t> missing;
  for (std::size_t k = 0; k < x.observed.size(); ++k)
    if (!x.observed[k]) missing.push_back(k);
  MaskedInstance c = x;
  for (std::size_t k : missing) c.observed[k] = 1;
  std::vector<std::size_t> digit(missing.size(), 0);
  std::vector<double> terms;
  while (true) {
    for (std::size_t q = 0; q < missing.size(); ++q) c.values[missing[q]] = static_cast<double>(digit[q]);
    terms.push_back(net.forward(c)[y]);
    std::size_t q = 0;
    for (; q < digit.size(); ++q) {
      if (++digit[q] < v) break;
      digit[q] = 0;
    }
    if (q == digit.size()) break;
  }
  return logsumexp(terms);
}

Quadrature gauss_hermite(std::size_t n) {
  if (n == 0) throw Error("quadrature needs at least one node");
  Quadrature q;
  q.nodes.assign(n, 0.0);
  q.weights.assign(n, 0.0);
  const double pim4 = std::pow(std::numbers::pi, -0.25);
  const double nd = static_cast<double>(n);
  double z = 0.0, pp = 0.0;
  for (std::size_t i = 0; i < (n + 1) / 2; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * nd + 1.0) - 1.85575 * std::pow(2.0 * nd + 1.0, -0.16667);
    } else if (i == 1) {
      z -= 1.14 * std::pow(nd, 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * q.nodes[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * q.nodes[1];
    } else {
      z = 2.0 * z - q.nodes[i - 2];
    }
    for (int it = 0; it < 100; ++it) {
      // Orthonormal Hermite recurrence.
      double p1 = pim4, p2 = 0.0;
      for (std::size_t j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        const double jd = static_cast<double>(j);
        p1 = z * std::sqrt(2.0 / (jd + 1.0)) * p2 - std::sqrt(jd / (jd + 1.0)) * p3;
      }
      pp = std::sqrt(2.0 * nd) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) break;
    }
    q.nodes[i] = z;
    q.nodes[n - 1 - i] = -z;
    q.weights[i] = q.weights[n - 1 - i] = 2.0 / (pp * pp);
  }
  return q;
}

double quadrature_log_likelihood(const Network& net, const MaskedInstance& x, std::size_t coord, std::size_t y) {
  const ComponentFamily& f = net.components();
  if (f.kind() != ComponentKind::diagonal_gaussian) throw Error("quadrature needs Gaussian components");
  if (coord >= x.observed.size() || x.observed[coord]) throw Error("coordinate to integrate must be missing");
  const std::size_t c = coord % f.dim();
  double center = 0.0, scale2 = 0.0;
  for (std::size_t d = 0; d < f.count(); ++d) {
    center += f.mean(d, c);
    scale2 = std::max(scale2, f.variance(d, c));
  }
  center /= static_cast<double>(f.count());
  const double scale = std::sqrt(2.0 * scale2);
  static const Quadrature q = gauss_hermite(64);
  MaskedInstance probe = x;
  probe.observed[coord] = 1;
  std::vector<double> terms(q.nodes.size());
  for (std::size_t k = 0; k < q.nodes.size(); ++k) {
    probe.values[coord] = center + scale * q.nodes[k];
    terms[k] = std::log(q.weights[k]) + q.nodes[k] * q.nodes[k] + net.forward(probe)[y];
  }
  return std::log(scale) + logsumexp(terms);
}

double log_rel_error(double a, double b) {
  if (a == b) return 0.0;
  if (!std::isfinite(a) || !std::isfinite(b)) return kInf;
  return std::abs(std::expm1(a - b));
}

std::vector<GradientProbe> gradient_check(const Network& net, const Dataset& batch, const TrainConfig& cfg,
                                          std::size_t probes, Rng& rng, double h) {
  const GradientTape grad = backward(net, batch, cfg);
  std::size_t weight_total = 0, total = 0;
  for (const auto& b : grad.weights) weight_total += b.size();
  total = weight_total;
  for (const auto& b : grad.components) total += b.size();

  std::vector<GradientProbe> out;
  for (std::size_t p = 0; p < probes; ++p) {
    std::size_t flat = rng.uniform_int(total);
    GradientProbe probe;
    probe.component = flat >= weight_total;
    if (probe.component) flat -= weight_total;
    const auto& blocks = probe.component ? grad.components : grad.weights;
    std::size_t b = 0;
    while (flat >= blocks[b].size()) flat -= blocks[b++].size();
    probe.block = b;
    probe.index = flat;
    probe.analytic = blocks[b][flat];

    auto shifted_loss = [&](double delta) {
      Network copy = net;
      if (probe.component) {
        copy.components().parameter_blocks()[b][flat] += delta;
      } else {
        copy.params().blocks()[b]->log_w[flat] += delta;
      }
      return loss(copy, batch, cfg).total;
    };
    probe.numeric = (shifted_loss(h) - shifted_loss(-h)) / (2.0 * h);
    const double denom = std::max({std::abs(probe.analytic), std::abs(probe.numeric), 1e-6});
    probe.rel_error = std::abs(probe.analytic - probe.numeric) / denom;
    out.push_back(probe);
  }
  return out;
}

double chi_square_p_value(double statistic, std::size_t dof) {
  if (dof == 0) return 1.0;
  return boost::math::gamma_q(0.5 * static_cast<double>(dof), 0.5 * statistic);
}

ChiSquare sampling_chi_square(const Network& net, std::size_t y, std::size_t samples, Rng& rng) {
  const ComponentFamily& f = net.components();
  if (f.kind() != ComponentKind::categorical) throw Error("chi-square test needs categorical components");
  const std::size_t coords = net.positions() * f.dim();
  const std::size_t v = f.alphabet();
  std::size_t cells = 1;
  for (std::size_t k = 0; k < coords; ++k) {
    cells *= v;
    if (cells > (std::size_t{1} << 20)) throw CapacityError("too many outcomes to enumerate");
  }
  std::vector<double> expected(cells);
  MaskedInstance x(net.positions(), f.dim());
  for (std::size_t cell = 0; cell < cells; ++cell) {
    std::size_t rest = cell;
    for (std::size_t k = coords; k-- > 0;) {
      x.values[k] = static_cast<double>(rest % v);
      rest /= v;
    }
    expected[cell] = std::exp(net.forward(x)[y]) * static_cast<double>(samples);
  }
  std::vector<double> observed(cells, 0.0);
  for (std::size_t s = 0; s < samples; ++s) {
    const MaskedInstance draw = sample(net, y, rng);
    std::size_t cell = 0;
    for (double value : draw.values) cell = cell * v + static_cast<std::size_t>(value);
    observed[cell] += 1.0;
  }

  // Pool sparse cells.
  std::vector<double> e, o;
  double pool_e = 0.0, pool_o = 0.0;
  for (std::size_t c = 0; c < cells; ++c) {
    if (expected[c] >= 5.0) {
      e.push_back(expected[c]);
      o.push_back(observed[c]);
    } else {
      pool_e += expected[c];
      pool_o += observed[c];
    }
  }
  if (pool_e >= 5.0 || (e.empty() && pool_e > 0.0)) {
    e.push_back(pool_e);
    o.push_back(pool_o);
  } else if (pool_e > 0.0 || pool_o > 0.0) {
    const auto smallest = static_cast<std::size_t>(std::min_element(e.begin(), e.end()) - e.begin());
    e[smallest] += pool_e;
    o[smallest] += pool_o;
  }
  ChiSquare r;
  for (std::size_t c = 0; c < e.size(); ++c) r.statistic += (o[c] - e[c]) * (o[c] - e[c]) / e[c];
  r.dof = e.empty() ? 0 : e.size() - 1;
  r.p_value = chi_square_p_value(r.statistic, r.dof);
  return r;
}

ExactAssignment exhaustive_assignment(const Network& net, const NeuronRef& neuron) {
  const auto [fh, fw] = receptive_field(net, neuron);
  if (neuron.layer == 0) return {0.0, {neuron.channel}};
  const Topology& t = net.topology();
  struct Node {
    std::size_t level, position, parent;  // parent == npos for the root
  };
  constexpr std::size_t npos = static_cast<std::size_t>(-1);
  std::vector<Node> nodes{{neuron.layer - 1, neuron.position, npos}};
  for (std::size_t q = 0; q < nodes.size(); ++q) {
    const Node node = nodes[q];
    if (node.level == 0) continue;
    for (std::size_t c : t.children(node.level - 1, node.position)) nodes.push_back({node.level - 1, c, q});
  }
  std::vector<std::size_t> choice(nodes.size(), 0);
  ExactAssignment best;
  best.log_score = -kInf;
  std::vector<std::size_t> best_choice;
  while (true) {
    double score = 0.0;
    for (std::size_t q = 0; q < nodes.size(); ++q) {
      const std::size_t gamma = nodes[q].parent == npos ? neuron.channel : choice[nodes[q].parent];
      score += weight_at(net, nodes[q].level, nodes[q].position, gamma, choice[q]);
    }
    if (score > best.log_score || best_choice.empty()) {
      best.log_score = score;
      best_choice = choice;
    }
    std::size_t q = nodes.size();
    while (q-- > 0) {
      if (++choice[q] < input_width(net, nodes[q].level)) break;
      choice[q] = 0;
    }
    if (q == static_cast<std::size_t>(-1)) break;
  }
  const std::size_t k = neuron.layer - 1;
  const std::size_t r0 = (neuron.position / t.level_width(k)) * fh;
  const std::size_t c0 = (neuron.position % t.level_width(k)) * fw;
  best.leaves.assign(fh * fw, 0);
  for (std::size_t q = 0; q < nodes.size(); ++q) {
    if (nodes[q].level != 0) continue;
    const std::size_t r = nodes[q].position / t.grid_width - r0;
    const std::size_t c = nodes[q].position % t.grid_width - c0;
    best.leaves[r * fw + c] = best_choice[q];
  }
  return best;
}

double greedy_log_score(const Network& net, const NeuronRef& neuron) {
  if (neuron.layer == 0) return 0.0;
  const Topology& t = net.topology();
  double total = 0.0;
  std::vector<std::pair<std::size_t, std::size_t>> stack{{neuron.position, neuron.channel}};
  for (std::size_t k = neuron.layer; k-- > 0;) {
    std::vector<std::pair<std::size_t, std::size_t>> next;
    for (auto [j, gamma] : stack) {
      std::size_t best = 0;
      for (std::size_t a = 1; a < input_width(net, k); ++a)
        if (weight_at(net, k, j, gamma, a) > weight_at(net, k, j, gamma, best)) best = a;
      total += weight_at(net, k, j, gamma, best);
      if (k > 0)
        for (std::size_t c : t.children(k - 1, j)) next.emplace_back(c, best);
    }
    stack = std::move(next);
  }
  return total;
}

std::size_t depth_efficiency_rank(Rng& rng) {
  const Topology t = sequence_topology(2, {2, 2}, 1);
  const HTParams p = HTParams::random(t, 2, rng);
  return numeric_rank(matricize(expand_ht(p, 0)), 1e-7);
}

double gmm_equivalence_error(std::size_t k, std::size_t n, std::size_t s, Rng& rng) {
  const auto log_w = random_simplex_log(k, rng);
  std::vector<double> w(k);
  for (std::size_t q = 0; q < k; ++q) w[q] = std::exp(log_w[q]);
  ComponentFamily f = ComponentFamily::gaussian(n * k, s);
  for (std::size_t q = 0; q < k; ++q)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < s; ++c) {
        f.set_mean(n * q + i, c, 2.0 * rng.normal());
        f.set_variance(n * q + i, c, 0.2 + 2.0 * rng.uniform());
      }
  const Network net(f, to_ht(gmm_cp_params(w, n)));
  MaskedInstance x(n, s);
  for (double& v : x.values) v = 2.0 * rng.normal();

  std::vector<double> terms(k);
  for (std::size_t q = 0; q < k; ++q) {
    double t = log_w[q];
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t c = 0; c < s; ++c) {
        const double mu = f.mean(n * q + i, c), var = f.variance(n * q + i, c);
        const double z = x.values[i * s + c] - mu;
        t += -0.5 * z * z / var - 0.5 * std::log(2.0 * std::numbers::pi * var);
      }
    terms[q] = t;
  }
  return log_rel_error(net.forward(x)[0], logsumexp(terms));
}

std::size_t ToyJoint::inputs() const {
  std::size_t n = 1;
  for (std::size_t k = 0; k < variables; ++k) n *= alphabet;
  return n;
}

std::vector<std::size_t> ToyJoint::decode(std::size_t index) const {
  std::vector<std::size_t> x(variables);
  for (std::size_t k = variables; k-- > 0;) {
    x[k] = index % alphabet;
    index /= alphabet;
  }
  return x;
}

ToyJoint joint_from_network(const Network& net, const ClassPrior& prior) {
  const ComponentFamily& f = net.components();
  if (f.kind() != ComponentKind::categorical || f.dim() != 1) throw Error("toy joints need categorical patches of size 1");
  ToyJoint j;
  j.variables = net.positions();
  j.alphabet = f.alphabet();
  j.classes = net.classes();
  j.probs.assign(j.inputs() * j.classes, 0.0);
  for (std::size_t xi = 0; xi < j.inputs(); ++xi) {
    const auto digits = j.decode(xi);
    MaskedInstance x(j.variables, 1);
    for (std::size_t k = 0; k < j.variables; ++k) x.values[k] = static_cast<double>(digits[k]);
    for (std::size_t y = 0; y < j.classes; ++y)
      j.probs[xi * j.classes + y] = std::exp(prior.log_probs[y] + dense_log_likelihood(net, x, y));
  }
  return j;
}

namespace {

bool consistent(const ToyJoint& j, std::size_t a, std::size_t b, std::size_t mask) {
  const auto da = j.decode(a), db = j.decode(b);
  for (std::size_t k = 0; k < j.variables; ++k)
    if (((mask >> k) & 1U) && da[k] != db[k]) return false;
  return true;
}

std::size_t argmax_lowest(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[best]) best = k;
  return best;
}

}  // namespace

std::size_t marginalized_bayes(const ToyJoint& j, std::size_t x, std::size_t mask) {
  std::vector<double> score(j.classes, 0.0);
  for (std::size_t xp = 0; xp < j.inputs(); ++xp)
    if (consistent(j, x, xp, mask))
      for (std::size_t y = 0; y < j.classes; ++y) score[y] += j.probs[xp * j.classes + y];
  return argmax_lowest(score);
}

std::size_t general_optimal(const ToyJoint& j, const MaskDistribution& q, std::size_t x, std::size_t mask) {
  std::vector<double> score(j.classes, 0.0);
  for (std::size_t xp = 0; xp < j.inputs(); ++xp)
    if (consistent(j, x, xp, mask))
      for (std::size_t y = 0; y < j.classes; ++y) score[y] += j.probs[xp * j.classes + y] * q(mask, xp);
  return argmax_lowest(score);
}

std::size_t imputed_bayes(const ToyJoint& j, Imputation method, std::size_t x, std::size_t mask) {
  auto digits = j.decode(x);
  if (method == Imputation::most_likely) {
    std::size_t best = x;
    double best_p = -1.0;
    for (std::size_t xp = 0; xp < j.inputs(); ++xp) {
      if (!consistent(j, x, xp, mask)) continue;
      double p = 0.0;
      for (std::size_t y = 0; y < j.classes; ++y) p += j.probs[xp * j.classes + y];
      if (p > best_p) {
        best_p = p;
        best = xp;
      }
    }
    digits = j.decode(best);
  } else {
    for (std::size_t k = 0; k < j.variables; ++k) {
      if ((mask >> k) & 1U) continue;
      if (method == Imputation::zero) {
        digits[k] = 0;
      } else {
        double mean = 0.0;
        for (std::size_t xp = 0; xp < j.inputs(); ++xp) {
          double p = 0.0;
          for (std::size_t y = 0; y < j.classes; ++y) p += j.probs[xp * j.classes + y];
          mean += p * static_cast<double>(j.decode(xp)[k]);
        }
        digits[k] = std::min(j.alphabet - 1, static_cast<std::size_t>(std::floor(mean + 0.5)));
      }
    }
  }
  std::size_t completed = 0;
  for (std::size_t d : digits) completed = completed * j.alphabet + d;
  std::vector<double> score(j.classes);
  for (std::size_t y = 0; y < j.classes; ++y) score[y] = j.probs[completed * j.classes + y];
  return argmax_lowest(score);
}

double expected_accuracy(const ToyJoint& j, const MaskDistribution& q,
                         const std::function<std::size_t(std::size_t, std::size_t)>& rule) {
  const std::size_t masks = std::size_t{1} << j.variables;
  double acc = 0.0;
  for (std::size_t x = 0; x < j.inputs(); ++x)
    for (std::size_t m = 0; m < masks; ++m) {
      const double qm = q(m, x);
      if (qm == 0.0) continue;
      const std::size_t pred = rule(x, m);
      acc += qm * j.probs[x * j.classes + pred];
    }
  return acc;
}

}  // namespace tmm::oracle
