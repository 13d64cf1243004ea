#include "tmm/inference.hpp"

#include <cmath>
#include <ostream>

#include "tmm/errors.hpp"
#include "tmm/logspace.hpp"
#include "tmm/parallel.hpp"

namespace tmm {

ClassPrior ClassPrior::uniform(std::size_t classes) {
  if (classes == 0) throw Error("class prior needs at least one class");
  ClassPrior p;
  p.log_probs.assign(classes, -std::log(static_cast<double>(classes)));
  return p;
}

ClassPrior ClassPrior::from_probs(std::span<const double> probs) {
  if (probs.empty()) throw Error("class prior needs at least one class");
  double total = 0.0;
  for (double q : probs) {
    if (!(q >= 0.0)) throw Error("class prior has a negative entry");
    total += q;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error("class prior does not sum to one");
  ClassPrior p;
  for (double q : probs) p.log_probs.push_back(std::log(q));
  return p;
}

std::vector<double> posterior_from_logits(std::span<const double> logits, const ClassPrior& prior) {
  if (logits.size() != prior.classes()) throw ShapeError("prior and network disagree on the class count");
  std::vector<double> post(logits.size());
  for (std::size_t y = 0; y < logits.size(); ++y) post[y] = logits[y] + prior.log_probs[y];
  const double z = logsumexp(post);
  if (z == -kInf) throw ZeroDensityError("observed event has zero density under every class");
  if (!std::isfinite(z)) throw Error("class posterior is not finite");
  for (double& v : post) v -= z;
  return post;
}

std::vector<double> class_posterior(const Network& net, const MaskedInstance& x, const ClassPrior& prior) {
  return posterior_from_logits(net.forward(x), prior);
}

std::size_t argmax(std::span<const double> v) {
  if (v.empty()) throw Error("argmax of an empty vector");
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k)
    if (v[k] > v[best]) best = k;
  return best;
}

std::size_t predict(const Network& net, const MaskedInstance& x, const ClassPrior& prior) {
  return argmax(class_posterior(net, x, prior));
}

MaskedInstance shift_instance(const MaskedInstance& x, std::size_t grid_height, std::size_t grid_width,
                              PatchShape patch, int dr, int dc) {
  x.validate();
  if (grid_height * grid_width != x.positions || patch.size() != x.dim) {
    throw ShapeError("instance does not match the image geometry");
  }
  const auto height = static_cast<long>(grid_height * patch.height);
  const auto width = static_cast<long>(grid_width * patch.width);
  auto index = [&](long r, long c) {
    const auto pr = static_cast<std::size_t>(r) / patch.height, pc = static_cast<std::size_t>(c) / patch.width;
    const auto ir = static_cast<std::size_t>(r) % patch.height, ic = static_cast<std::size_t>(c) % patch.width;
    return (pr * grid_width + pc) * x.dim + ir * patch.width + ic;
  };
  MaskedInstance out(x.positions, x.dim);
  for (long r = 0; r < height; ++r)
    for (long c = 0; c < width; ++c) {
      const long sr = r - dr, sc = c - dc;
      const std::size_t dst = index(r, c);
      if (sr < 0 || sc < 0 || sr >= height || sc >= width) {
        out.values[dst] = 0.0;
        out.observed[dst] = 0;
      } else {
        const std::size_t src = index(sr, sc);
        out.values[dst] = x.values[src];
        out.observed[dst] = x.observed[src];
      }
    }
  return out;
}

std::vector<std::vector<double>> batch_posteriors(const Network& net, std::span<const MaskedInstance> xs,
                                                  const ClassPrior& prior, const BatchOptions& options) {
  const CompiledNetwork compiled(net);
  std::vector<std::vector<double>> out(xs.size());
  const auto& e = options.ensemble;
  parallel_for(xs.size(), options.threads, [&](std::size_t i) {
    if (!e.enabled) {
      out[i] = posterior_from_logits(compiled.forward(xs[i]), prior);
      return;
    }
    std::vector<double> mean(prior.classes(), 0.0);
    double count = 0.0;
    for (int dr = -e.radius; dr <= e.radius; ++dr)
      for (int dc = -e.radius; dc <= e.radius; ++dc) {
        const MaskedInstance shifted = shift_instance(xs[i], e.grid_height, e.grid_width, net.patch_shape(), dr, dc);
        const auto post = posterior_from_logits(compiled.forward(shifted), prior);
        for (std::size_t y = 0; y < mean.size(); ++y) mean[y] += std::exp(post[y]);
        count += 1.0;
      }
    for (double& v : mean) v = std::log(v / count);
    out[i] = std::move(mean);
  });
  return out;
}

std::vector<std::size_t> batch_predict(const Network& net, std::span<const MaskedInstance> xs, const ClassPrior& prior,
                                       const BatchOptions& options) {
  const auto post = batch_posteriors(net, xs, prior, options);
  std::vector<std::size_t> out(post.size());
  for (std::size_t i = 0; i < post.size(); ++i) out[i] = argmax(post[i]);
  return out;
}

double accuracy(std::span<const std::size_t> predicted, std::span<const std::size_t> labels) {
  if (predicted.size() != labels.size()) throw ShapeError("prediction and label counts differ");
  if (labels.empty()) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predicted[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

void write_prediction_csv(std::ostream& out, std::span<const MaskedInstance> xs,
                          const std::vector<std::vector<double>>& posteriors, std::span<const std::size_t> labels) {
  if (posteriors.size() != xs.size() || labels.size() != xs.size()) throw ShapeError("prediction table sizes differ");
  const std::size_t k = posteriors.empty() ? 0 : posteriors.front().size();
  out << "# tmmkit-csv v1\n";
  out << "id,mask_density";
  for (std::size_t y = 0; y < k; ++y) out << ",log_posterior_" << y;
  out << ",predicted,label\n";
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    out << i << ',' << xs[i].observed_fraction();
    for (double v : posteriors[i]) out << ',' << v;
    out << ',' << argmax(posteriors[i]) << ',' << labels[i] << '\n';
  }
  out.precision(old);
}

Network imputation_gap_network(double epsilon) {
  if (!(epsilon >= 0.0 && epsilon < 1.0)) throw Error("epsilon must lie in [0, 1)");
  CPParams cp;
  cp.positions = 2;
  cp.components = 2;
  cp.rank = 2;
  cp.classes = 2;
  const double half = std::log(0.5);
  // Rank term z is the class-conditional distribution of class z.
  cp.log_top = {0.0, -kInf, -kInf, 0.0};
  cp.log_factors = {
      half, half,  // z=0, X1
      half, half,  // z=1, X1
      std::log((1.0 - epsilon) / (2.0 - epsilon)), std::log(1.0 / (2.0 - epsilon)),  // z=0, X2
      -kInf, 0.0,                                                                    // z=1, X2
  };
  ComponentFamily family = ComponentFamily::categorical(2, 1, 2);
  const double one_hot[2][2] = {{1.0, 0.0}, {0.0, 1.0}};
  for (std::size_t d = 0; d < 2; ++d) family.set_probs(d, 0, one_hot[d]);
  return Network(std::move(family), to_ht(cp));
}

ClassPrior imputation_gap_prior(double epsilon) {
  const double probs[2] = {(2.0 - epsilon) / 3.0, (1.0 + epsilon) / 3.0};
  return ClassPrior::from_probs(probs);
}

ImputationGapReport imputation_gap_demo(double epsilon) {
  const Network net = imputation_gap_network(epsilon);
  const ClassPrior prior = imputation_gap_prior(epsilon);
  auto instance = [](int x1, int x2, bool x2_observed) {
    MaskedInstance x = MaskedInstance::complete(2, 1, {static_cast<double>(x1), static_cast<double>(x2)});
    x.observed[1] = x2_observed ? 1 : 0;
    return x;
  };
  auto log_joint = [&](int x1, int x2, std::size_t y) {
    return prior.log_probs[y] + net.forward(instance(x1, x2, true))[y];
  };

  ImputationGapReport r;
  r.epsilon = epsilon;
  r.closed_form_marginalized = (2.0 - epsilon) / 3.0;
  r.closed_form_imputation = (1.0 + epsilon) / 3.0;
  for (int x1 = 0; x1 < 2; ++x1) {
    const std::size_t marginalized = predict(net, instance(x1, 0, false), prior);

    // Unconditional: most likely completion of X2 under P(X), then Bayes.
    const double px[2] = {std::exp(logaddexp(log_joint(x1, 0, 0), log_joint(x1, 0, 1))),
                          std::exp(logaddexp(log_joint(x1, 1, 0), log_joint(x1, 1, 1)))};
    const int completion = px[1] > px[0] ? 1 : 0;
    const std::size_t unconditional = predict(net, instance(x1, completion, true), prior);

    // Conditional: per-class completion g(x; y), then argmax_y P(y | g(x; y)).
    std::vector<double> score(2);
    for (std::size_t y = 0; y < 2; ++y) {
      const int g = log_joint(x1, 1, y) > log_joint(x1, 0, y) ? 1 : 0;
      score[y] = class_posterior(net, instance(x1, g, true), prior)[y];
    }
    const std::size_t conditional = argmax(score);

    for (int x2 = 0; x2 < 2; ++x2)
      for (std::size_t y = 0; y < 2; ++y) {
        const double p = std::exp(log_joint(x1, x2, y));
        if (p == 0.0) continue;
        const std::size_t full = predict(net, instance(x1, x2, true), prior);
        r.marginalized_accuracy += p * (marginalized == y);
        r.unconditional_imputation_accuracy += p * (unconditional == y);
        r.conditional_imputation_accuracy += p * (conditional == y);
        r.full_observation_accuracy += p * (full == y);
      }
  }
  return r;
}

}  // namespace tmm
