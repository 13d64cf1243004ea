#include "tmm/components.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "tmm/errors.hpp"
#include "tmm/logspace.hpp"

namespace tmm {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2π)

std::size_t symbol_of(double x, std::size_t alphabet) {
  if (!(x >= 0.0) || x >= static_cast<double>(alphabet) || x != std::floor(x)) {
    throw ShapeError("categorical value " + std::to_string(x) + " is not a symbol in [0, " +
                     std::to_string(alphabet) + ")");
  }
  return static_cast<std::size_t>(x);
}

}  // namespace

ComponentFamily ComponentFamily::gaussian(std::size_t count, std::size_t dim) {
  if (count == 0 || dim == 0) throw ShapeError("gaussian family needs M > 0 and s > 0");
  ComponentFamily f;
  f.kind_ = ComponentKind::diagonal_gaussian;
  f.count_ = count;
  f.dim_ = dim;
  f.means_.assign(count * dim, 0.0);
  f.rho_.assign(count * dim, softplus_inverse(1.0 - kVarianceFloor));
  return f;
}

ComponentFamily ComponentFamily::categorical(std::size_t count, std::size_t dim, std::size_t alphabet) {
  if (count == 0 || dim == 0 || alphabet == 0) throw ShapeError("categorical family needs M, s, V > 0");
  ComponentFamily f;
  f.kind_ = ComponentKind::categorical;
  f.count_ = count;
  f.dim_ = dim;
  f.alphabet_ = alphabet;
  f.log_probs_.assign(count * dim * alphabet, -std::log(static_cast<double>(alphabet)));
  return f;
}

void ComponentFamily::check_component(std::size_t d) const {
  if (d >= count_) throw ShapeError("component index " + std::to_string(d) + " out of range");
}

double ComponentFamily::variance(std::size_t d, std::size_t c) const {
  return kVarianceFloor + softplus(rho_[d * dim_ + c]);
}

void ComponentFamily::set_mean(std::size_t d, std::size_t c, double mu) {
  check_component(d);
  means_[d * dim_ + c] = mu;
}

void ComponentFamily::set_variance(std::size_t d, std::size_t c, double sigma2) {
  check_component(d);
  if (!(sigma2 > kVarianceFloor)) throw Error("variance must exceed the floor");
  rho_[d * dim_ + c] = softplus_inverse(sigma2 - kVarianceFloor);
}

void ComponentFamily::set_variance_param(std::size_t d, std::size_t c, double rho) {
  check_component(d);
  rho_[d * dim_ + c] = rho;
}

void ComponentFamily::set_probs(std::size_t d, std::size_t c, std::span<const double> probs) {
  check_component(d);
  if (probs.size() != alphabet_) throw ShapeError("probability table length must equal the alphabet size");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw Error("negative probability");
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error("probability table does not sum to one");
  for (std::size_t v = 0; v < alphabet_; ++v) log_probs_[(d * dim_ + c) * alphabet_ + v] = std::log(probs[v]);
}

double ComponentFamily::log_density(std::size_t d, std::span<const double> x,
                                    std::span<const std::uint8_t> observed) const {
  check_component(d);
  if (x.size() != dim_ || observed.size() != dim_) throw ShapeError("local structure size does not match s");
  double acc = 0.0;
  for (std::size_t c = 0; c < dim_; ++c) {
    if (!observed[c]) continue;
    if (kind_ == ComponentKind::diagonal_gaussian) {
      const double var = variance(d, c);
      const double diff = x[c] - mean(d, c);
      acc += -0.5 * (diff * diff / var + kLog2Pi + std::log(var));
    } else {
      acc += log_prob(d, c, symbol_of(x[c], alphabet_));
    }
  }
  return acc;
}

std::vector<double> ComponentFamily::sample(std::size_t d, Rng& rng) const {
  check_component(d);
  std::vector<double> x(dim_);
  for (std::size_t c = 0; c < dim_; ++c) {
    if (kind_ == ComponentKind::diagonal_gaussian) {
      x[c] = mean(d, c) + std::sqrt(variance(d, c)) * rng.normal();
    } else {
      const std::span<const double> table(&log_probs_[(d * dim_ + c) * alphabet_], alphabet_);
      x[c] = static_cast<double>(rng.categorical_log(table));
    }
  }
  return x;
}

std::vector<double> ComponentFamily::mode(std::size_t d) const {
  check_component(d);
  std::vector<double> x(dim_);
  for (std::size_t c = 0; c < dim_; ++c) {
    if (kind_ == ComponentKind::diagonal_gaussian) {
      x[c] = mean(d, c);
    } else {
      std::size_t best = 0;
      for (std::size_t v = 1; v < alphabet_; ++v)
        if (log_prob(d, c, v) > log_prob(d, c, best)) best = v;
      x[c] = static_cast<double>(best);
    }
  }
  return x;
}

std::vector<std::span<double>> ComponentFamily::parameter_blocks() {
  if (kind_ == ComponentKind::diagonal_gaussian) return {means_, rho_};
  return {log_probs_};
}

std::vector<std::span<const double>> ComponentFamily::parameter_blocks() const {
  if (kind_ == ComponentKind::diagonal_gaussian) return {means_, rho_};
  return {log_probs_};
}

std::vector<std::size_t> ComponentFamily::simplex_group_sizes() const {
  if (kind_ == ComponentKind::diagonal_gaussian) return {0, 0};
  return {alphabet_};
}

void ComponentFamily::normalize() {
  if (kind_ != ComponentKind::categorical) return;
  for (std::size_t off = 0; off < log_probs_.size(); off += alphabet_) {
    std::span<double> table(&log_probs_[off], alphabet_);
    const double z = logsumexp(table);
    if (!std::isfinite(z)) throw Error("categorical table with no finite entry");
    for (double& v : table) v -= z;
  }
}

double ComponentFamily::normalization_error() const {
  if (kind_ != ComponentKind::categorical) return 0.0;
  double worst = 0.0;
  for (std::size_t off = 0; off < log_probs_.size(); off += alphabet_) {
    worst = std::max(worst, std::abs(logsumexp(std::span<const double>(&log_probs_[off], alphabet_))));
  }
  return worst;
}

ComponentEvaluator::ComponentEvaluator(const ComponentFamily& family) : family_(&family) {
  if (family.kind() != ComponentKind::diagonal_gaussian) return;
  const std::size_t n = family.count() * family.dim();
  inv_var_.resize(n);
  log_norm_.resize(n);
  dvar_drho_.resize(n);
  const auto rho = family.parameter_blocks()[1];
  for (std::size_t k = 0; k < n; ++k) {
    const double var = kVarianceFloor + softplus(rho[k]);
    inv_var_[k] = 1.0 / var;
    log_norm_[k] = -0.5 * (kLog2Pi + std::log(var));
    dvar_drho_[k] = sigmoid(rho[k]);
  }
}

void ComponentEvaluator::log_densities(std::span<const double> x, std::span<const std::uint8_t> observed,
                                       std::span<double> out) const {
  const ComponentFamily& f = *family_;
  const std::size_t s = f.dim();
  if (x.size() != s || observed.size() != s) throw ShapeError("local structure size does not match s");
  if (f.kind() == ComponentKind::diagonal_gaussian) {
    const auto means = f.parameter_blocks()[0];
    for (std::size_t d = 0; d < f.count(); ++d) {
      double acc = 0.0;
      const std::size_t base = d * s;
      for (std::size_t c = 0; c < s; ++c) {
        if (!observed[c]) continue;
        const double diff = x[c] - means[base + c];
        acc += log_norm_[base + c] - 0.5 * diff * diff * inv_var_[base + c];
      }
      out[d] = acc;
    }
  } else {
    for (std::size_t d = 0; d < f.count(); ++d) {
      double acc = 0.0;
      for (std::size_t c = 0; c < s; ++c) {
        if (observed[c]) acc += f.log_prob(d, c, symbol_of(x[c], f.alphabet()));
      }
      out[d] = acc;
    }
  }
}

void ComponentEvaluator::backprop(std::span<const double> x, std::span<const std::uint8_t> observed,
                                  std::span<const double> upstream, std::vector<std::vector<double>>& grads) const {
  const ComponentFamily& f = *family_;
  const std::size_t s = f.dim();
  if (f.kind() == ComponentKind::diagonal_gaussian) {
    const auto means = f.parameter_blocks()[0];
    auto& g_mean = grads[0];
    auto& g_rho = grads[1];
    for (std::size_t d = 0; d < f.count(); ++d) {
      const double g = upstream[d];
      if (g == 0.0) continue;
      const std::size_t base = d * s;
      for (std::size_t c = 0; c < s; ++c) {
        if (!observed[c]) continue;
        const double iv = inv_var_[base + c];
        const double diff = x[c] - means[base + c];
        g_mean[base + c] += g * diff * iv;
        g_rho[base + c] += g * 0.5 * (diff * diff * iv * iv - iv) * dvar_drho_[base + c];
      }
    }
  } else {
    auto& g_lp = grads[0];
    const std::size_t v_count = f.alphabet();
    for (std::size_t d = 0; d < f.count(); ++d) {
      const double g = upstream[d];
      if (g == 0.0) continue;
      for (std::size_t c = 0; c < s; ++c) {
        if (observed[c]) g_lp[(d * s + c) * v_count + symbol_of(x[c], v_count)] += g;
      }
    }
  }
}

}  // namespace tmm
