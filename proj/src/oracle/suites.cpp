#include <algorithm>
#include <cmath>
#include <sstream>

#include "tmm/errors.hpp"
#include "tmm/inference.hpp"
#include "tmm/logspace.hpp"
#include "tmm/oracle.hpp"

namespace tmm::oracle {

namespace {

template <typename T>
T pick(std::initializer_list<T> options, Rng& rng) {
  return *(options.begin() + rng.uniform_int(options.size()));
}

void record(SuiteReport& r, double err, double tol) {
  r.max_rel_err = std::max(r.max_rel_err, err);
  if (!(err <= tol)) ++r.failures;
}

Dataset random_batch(const Network& net, std::size_t count, double missing, Rng& rng) {
  Dataset d;
  for (std::size_t i = 0; i < count; ++i) {
    d.instances.push_back(random_instance(net, missing, rng));
    d.labels.push_back(rng.uniform_int(net.classes()));
  }
  return d;
}

}  // namespace

SuiteReport forward_equivalence_suite(std::size_t trials, std::uint64_t seed) {
  SuiteReport r;
  r.name = "forward_equivalence";
  const Rng root(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = root.derive(t);
    RandomNetSpec spec;
    const std::size_t n = pick<std::size_t>({2, 4, 8, 16}, rng);
    spec.components = n == 16 ? 2 : pick<std::size_t>({2, 3}, rng);
    spec.deep = rng.bernoulli(0.5);
    const bool square = (n == 4 || n == 16) && rng.bernoulli(0.5);
    spec.grid_height = square ? (n == 4 ? 2 : 4) : 1;
    spec.grid_width = n / spec.grid_height;
    spec.arity = (!square && (n == 4 || n == 16) && rng.bernoulli(0.3)) ? 4 : 2;
    spec.sharing = spec.deep ? pick({Sharing::unshared, Sharing::shared, Sharing::window}, rng)
                             : pick({Sharing::unshared, Sharing::shared}, rng);
    spec.rank = pick<std::size_t>({1, 2, 3}, rng);
    spec.classes = pick<std::size_t>({1, 2, 3}, rng);
    spec.family = rng.bernoulli(0.5) ? Family::gaussian : Family::categorical;
    spec.dim = pick<std::size_t>({1, 2}, rng);
    spec.alphabet = pick<std::size_t>({2, 3}, rng);
    const Network net = random_network(spec, rng);
    const MaskedInstance x = random_instance(net, pick({0.0, 0.3, 0.7}, rng), rng);
    const auto out = net.forward(x);
    for (std::size_t y = 0; y < net.classes(); ++y) record(r, log_rel_error(out[y], dense_log_likelihood(net, x, y)), 1e-9);
    ++r.trials;
  }
  r.passed = r.failures == 0;
  r.detail = "tolerance=1e-9";
  return r;
}

SuiteReport marginalization_suite(std::size_t trials, std::uint64_t seed) {
  SuiteReport r;
  r.name = "marginalization";
  const Rng root(seed);
  double cat_err = 0.0, gauss_err = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = root.derive(t);
    RandomNetSpec spec;
    spec.grid_width = pick<std::size_t>({2, 4}, rng);
    spec.deep = rng.bernoulli(0.5);
    spec.components = pick<std::size_t>({2, 3}, rng);
    spec.rank = pick<std::size_t>({1, 2}, rng);
    spec.classes = 2;
    spec.dim = pick<std::size_t>({1, 2}, rng);
    const bool categorical = t % 2 == 0;
    spec.family = categorical ? Family::categorical : Family::gaussian;
    spec.alphabet = pick<std::size_t>({2, 3}, rng);
    const Network net = random_network(spec, rng);
    MaskedInstance x = random_instance(net, 0.4, rng);
    const std::size_t y = rng.uniform_int(net.classes());
    if (categorical) {
      x.observed[rng.uniform_int(x.observed.size())] = 0;
      const double err = log_rel_error(net.forward(x)[y], completion_log_likelihood(net, x, y));
      cat_err = std::max(cat_err, err);
      record(r, err, 1e-9);
    } else {
      const std::size_t coord = rng.uniform_int(x.observed.size());
      x.observed[coord] = 0;
      const double err = log_rel_error(net.forward(x)[y], quadrature_log_likelihood(net, x, coord, y));
      gauss_err = std::max(gauss_err, err);
      record(r, err, 1e-6);
    }
    ++r.trials;
  }
  r.passed = r.failures == 0;
  std::ostringstream d;
  d << "categorical_max=" << cat_err << ";gaussian_max=" << gauss_err << ";tolerance=1e-9/1e-6";
  r.detail = d.str();
  return r;
}

SuiteReport gradient_suite(std::size_t probes, std::uint64_t seed) {
  SuiteReport r;
  r.name = "gradient";
  const Rng root(seed);
  TrainConfig cfg;
  cfg.beta = 0.1;
  cfg.lambda = 0.01;
  const std::size_t configs = 8;
  for (std::size_t c = 0; c < configs; ++c) {
    Rng rng = root.derive(c);
    RandomNetSpec spec;
    spec.deep = (c & 1U) != 0;
    spec.grid_width = 4;
    spec.components = 2;
    spec.rank = 2;
    spec.classes = 2;
    spec.family = (c & 4U) != 0 ? Family::gaussian : Family::categorical;
    spec.dim = 2;
    spec.alphabet = 3;
    const double missing = (c & 2U) != 0 ? 0.4 : 0.0;
    const Network net = random_network(spec, rng);
    const Dataset batch = random_batch(net, 3, missing, rng);
    const std::size_t share = probes / configs + (c < probes % configs ? 1 : 0);
    for (const auto& p : gradient_check(net, batch, cfg, share, rng)) {
      record(r, p.rel_error, 1e-3);
      ++r.trials;
    }
  }
  r.passed = r.failures == 0;
  r.detail = "h=1e-4;tolerance=1e-3";
  return r;
}

SuiteReport depth_efficiency_suite(std::size_t trials, std::uint64_t seed) {
  SuiteReport r;
  r.name = "depth_efficiency";
  const Rng root(seed);
  std::size_t full = 0;
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = root.derive(t);
    const std::size_t rank = depth_efficiency_rank(rng);
    if (rank == 4) {
      ++full;
    } else {
      ++r.failures;
    }
    ++r.trials;
  }
  r.passed = trials > 0 && full * 100 >= trials * 99;
  std::ostringstream d;
  d << "rank4=" << full << "/" << trials << ";required>=99%";
  r.detail = d.str();
  return r;
}

SuiteReport gmm_suite(std::size_t trials, std::uint64_t seed) {
  SuiteReport r;
  r.name = "gmm_equivalence";
  const Rng root(seed);
  for (std::size_t t = 0; t < trials; ++t) {
    Rng rng = root.derive(t);
    const std::size_t k = 1 + rng.uniform_int(4), n = 1 + rng.uniform_int(4), s = 1 + rng.uniform_int(3);
    record(r, gmm_equivalence_error(k, n, s, rng), 1e-9);
    ++r.trials;
  }
  r.passed = r.failures == 0;
  r.detail = "tolerance=1e-9";
  return r;
}

SuiteReport sampling_suite(std::size_t models, std::size_t samples, std::uint64_t seed) {
  SuiteReport r;
  r.name = "sampling";
  const Rng root(seed);
  double min_p = 1.0;
  for (std::size_t t = 0; t < models; ++t) {
    Rng rng = root.derive(t);
    RandomNetSpec spec;
    spec.deep = rng.bernoulli(0.5);
    spec.grid_width = pick<std::size_t>({2, 4}, rng);
    spec.components = pick<std::size_t>({2, 3}, rng);
    spec.rank = 2;
    spec.classes = 2;
    spec.family = Family::categorical;
    spec.alphabet = spec.grid_width == 4 ? 2 : 3;
    const Network net = random_network(spec, rng);
    const ChiSquare c = sampling_chi_square(net, rng.uniform_int(net.classes()), samples, rng);
    min_p = std::min(min_p, c.p_value);
    if (!(c.p_value > 1e-3)) ++r.failures;
    ++r.trials;
  }
  r.passed = r.failures <= 1;
  std::ostringstream d;
  d << "min_p=" << min_p << ";significance=1e-3;allowed_failures=1";
  r.detail = d.str();
  return r;
}

SuiteReport imputation_gap_suite() {
  SuiteReport r;
  r.name = "imputation_gap";
  const ImputationGapReport g = imputation_gap_demo(1e-4);
  auto rel = [](double a, double b) { return std::abs(a - b) / std::abs(b); };
  record(r, rel(g.marginalized_accuracy, g.closed_form_marginalized), 1e-12);
  record(r, rel(g.unconditional_imputation_accuracy, g.closed_form_imputation), 1e-12);
  record(r, rel(g.conditional_imputation_accuracy, g.closed_form_imputation), 1e-12);
  r.trials = 3;
  r.passed = r.failures == 0;
  std::ostringstream d;
  d.precision(8);
  d << "marginalized=" << g.marginalized_accuracy << ";imputation=" << g.unconditional_imputation_accuracy
    << ";epsilon=1e-4";
  r.detail = d.str();
  return r;
}

SuiteReport simplex_suite(const Network& net) {
  SuiteReport r;
  r.name = "simplex";
  const double err = net.normalization_error();
  record(r, err, 1e-9);
  ++r.trials;
  double n_entries = 1.0;
  for (std::size_t i = 0; i < net.positions(); ++i) n_entries *= static_cast<double>(net.components().count());
  bool dense = false;
  if (n_entries <= static_cast<double>(std::size_t{1} << 20)) {
    dense = true;
    for (std::size_t y = 0; y < net.classes(); ++y) {
      record(r, std::abs(expand(net, y).sum() - 1.0), 1e-9);
      ++r.trials;
    }
  }
  r.passed = r.failures == 0;
  r.detail = dense ? "offsets+dense_sum" : "offsets";
  return r;
}

std::string format_report(const SuiteReport& r) {
  std::ostringstream out;
  out.precision(6);
  out << "suite=" << r.name << " status=" << (r.passed ? "PASS" : "FAIL") << " trials=" << r.trials
      << " failures=" << r.failures << " max_rel_err=" << r.max_rel_err;
  if (!r.detail.empty()) out << " detail=" << r.detail;
  return out.str();
}

}  // namespace tmm::oracle
