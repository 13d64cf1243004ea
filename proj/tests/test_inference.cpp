#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "tmm/errors.hpp"
#include "tmm/inference.hpp"
#include "tmm/logspace.hpp"
#include "tmm/oracle.hpp"
#include "toy_models.hpp"

using namespace tmm;

namespace {

Network tiny_net(std::uint64_t seed, bool deep, std::size_t n, std::size_t classes = 2, std::size_t alphabet = 2) {
  Rng rng(seed);
  oracle::RandomNetSpec spec;
  spec.deep = deep;
  spec.grid_width = n;
  spec.classes = classes;
  spec.alphabet = alphabet;
  spec.components = 3;
  spec.rank = 2;
  return oracle::random_network(spec, rng);
}

MaskedInstance from_code(const oracle::ToyJoint& j, std::size_t x, std::size_t mask) {
  const auto digits = j.decode(x);
  MaskedInstance m(j.variables, 1);
  for (std::size_t k = 0; k < j.variables; ++k) {
    m.values[k] = static_cast<double>(digits[k]);
    m.observed[k] = (mask >> k) & 1U;
  }
  return m;
}

MaskedInstance all_missing(std::size_t n) {
  MaskedInstance x(n, 1);
  std::fill(x.observed.begin(), x.observed.end(), 0);
  return x;
}

}  // namespace

TEST(ClassPosterior, AllMissingUniformPrior) {
  const Network net = tiny_net(1, true, 4, 3);
  const auto post = class_posterior(net, all_missing(4), ClassPrior::uniform(3));
  for (double p : post) EXPECT_NEAR(std::exp(p), 1.0 / 3.0, 1e-12);
}

TEST(ClassPosterior, PriorDominatesEqualLikelihoods) {
  const Network net = tiny_net(2, true, 4);
  const std::vector<double> prior{0.9, 0.1};
  const auto post = class_posterior(net, all_missing(4), ClassPrior::from_probs(prior));
  EXPECT_NEAR(std::exp(post[0]), 0.9, 1e-12);
  EXPECT_NEAR(std::exp(post[1]), 0.1, 1e-12);
}

TEST(ClassPosterior, MatchesBayesOnDenseJoint) {
  const Network net = tiny_net(3, true, 4, 3, 3);
  const std::vector<double> pp{0.2, 0.5, 0.3};
  const ClassPrior prior = ClassPrior::from_probs(pp);
  const oracle::ToyJoint j = oracle::joint_from_network(net, prior);
  for (std::size_t x = 0; x < j.inputs(); x += 7) {
    for (std::size_t mask : {15u, 5u, 8u, 0u}) {
      std::vector<double> score(3, 0.0);
      for (std::size_t xp = 0; xp < j.inputs(); ++xp) {
        bool ok = true;
        const auto a = j.decode(x), b = j.decode(xp);
        for (std::size_t k = 0; k < 4; ++k) ok = ok && (!((mask >> k) & 1U) || a[k] == b[k]);
        if (!ok) continue;
        for (std::size_t y = 0; y < 3; ++y) score[y] += j.probs[xp * 3 + y];
      }
      const double total = score[0] + score[1] + score[2];
      const auto post = class_posterior(net, from_code(j, x, mask), prior);
      for (std::size_t y = 0; y < 3; ++y) EXPECT_NEAR(std::exp(post[y]), score[y] / total, 1e-12);
    }
  }
}

TEST(ClassPosterior, Normalized) {
  Rng rng(4);
  oracle::RandomNetSpec spec;
  spec.family = oracle::Family::gaussian;
  spec.classes = 4;
  spec.dim = 2;
  const Network net = oracle::random_network(spec, rng);
  for (int k = 0; k < 20; ++k) {
    const auto post = class_posterior(net, oracle::random_instance(net, 0.5, rng), ClassPrior::uniform(4));
    EXPECT_NEAR(logsumexp(post), 0.0, 1e-9);
  }
}

TEST(ClassPosterior, ZeroDensityEverywhere) {
  const Network net = toy::class_per_term_network({{{1.0, 0.0}}, {{1.0, 0.0}}});
  EXPECT_THROW(class_posterior(net, MaskedInstance::complete(1, 1, {1}), ClassPrior::uniform(2)), ZeroDensityError);
}

TEST(Predict, FullyObservedIsBayesOnForward) {
  const Network net = tiny_net(5, false, 4, 3, 3);
  const std::vector<double> pp{0.6, 0.3, 0.1};
  const ClassPrior prior = ClassPrior::from_probs(pp);
  Rng rng(6);
  for (int k = 0; k < 30; ++k) {
    const MaskedInstance x = oracle::random_instance(net, 0.0, rng);
    auto out = net.forward(x);
    for (std::size_t y = 0; y < 3; ++y) out[y] += std::log(pp[y]);
    EXPECT_EQ(predict(net, x, prior), argmax(out));
  }
}

TEST(Predict, AllMissingTiesGoToFirstClass) {
  const Network net = tiny_net(7, true, 4, 3);
  EXPECT_EQ(predict(net, all_missing(4), ClassPrior::uniform(3)), 0u);
  EXPECT_EQ(argmax(std::vector<double>{1.0, 3.0, 3.0}), 1u);
}

TEST(Predict, ExhaustiveMarginalizedBayesOnThreeVariables) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const Network net = tiny_net(10 + seed, false, 3);
    const ClassPrior prior = ClassPrior::uniform(2);
    const oracle::ToyJoint j = oracle::joint_from_network(net, prior);
    ASSERT_EQ(j.inputs(), 8u);
    for (std::size_t x = 0; x < 8; ++x)
      for (std::size_t mask = 0; mask < 8; ++mask)
        EXPECT_EQ(predict(net, from_code(j, x, mask), prior), oracle::marginalized_bayes(j, x, mask));
  }
}

TEST(Predict, IgnoresValuesUnderMissingFlags) {
  const Network net = tiny_net(15, true, 4, 2, 3);
  MaskedInstance a = MaskedInstance::complete(4, 1, {0, 1, 2, 1});
  a.observed[1] = a.observed[3] = 0;
  MaskedInstance b = a;
  b.values[1] = 2;
  b.values[3] = 123.0;
  EXPECT_EQ(net.forward(a), net.forward(b));
}

TEST(Predict, MarOptimalityAgainstImputation) {
  // Variable 0 (the leading binary digit of x) always observed; the others go
  // missing at a rate that depends on it.
  const oracle::MaskDistribution mar = [](std::size_t mask, std::size_t x) {
    if (!(mask & 1U)) return 0.0;
    const double p = ((x >> 3) & 1U) ? 0.7 : 0.2;
    double q = 1.0;
    for (std::size_t k = 1; k < 4; ++k) q *= ((mask >> k) & 1U) ? 1.0 - p : p;
    return q;
  };
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Network net = tiny_net(20 + seed, true, 4);
    const oracle::ToyJoint j = oracle::joint_from_network(net, ClassPrior::uniform(2));
    const double best = oracle::expected_accuracy(
        j, mar, [&](std::size_t x, std::size_t m) { return oracle::marginalized_bayes(j, x, m); });
    for (auto method : {oracle::Imputation::zero, oracle::Imputation::mean, oracle::Imputation::most_likely}) {
      const double imp = oracle::expected_accuracy(
          j, mar, [&](std::size_t x, std::size_t m) { return oracle::imputed_bayes(j, method, x, m); });
      EXPECT_GE(best, imp - 1e-12);
    }
    const double general = oracle::expected_accuracy(
        j, mar, [&](std::size_t x, std::size_t m) { return oracle::general_optimal(j, mar, x, m); });
    EXPECT_NEAR(best, general, 1e-12);
  }
}

TEST(ImputationGap, ClosedFormAccuracies) {
  const ImputationGapReport r = imputation_gap_demo(1e-4);
  EXPECT_NEAR(r.marginalized_accuracy, (2.0 - 1e-4) / 3.0, 1e-12);
  EXPECT_NEAR(r.unconditional_imputation_accuracy, (1.0 + 1e-4) / 3.0, 1e-12);
  EXPECT_NEAR(r.conditional_imputation_accuracy, (1.0 + 1e-4) / 3.0, 1e-12);
  EXPECT_NEAR(100.0 * r.marginalized_accuracy, 66.663, 5e-4);
  EXPECT_NEAR(100.0 * r.unconditional_imputation_accuracy, 33.337, 5e-4);
}

TEST(ImputationGap, ClosedFormAtZeroEpsilon) {
  const ImputationGapReport r = imputation_gap_demo(0.0);
  EXPECT_DOUBLE_EQ(r.closed_form_marginalized, 2.0 / 3.0);
  EXPECT_DOUBLE_EQ(r.closed_form_imputation, 1.0 / 3.0);
  EXPECT_NEAR(r.marginalized_accuracy, 2.0 / 3.0, 1e-12);
}

TEST(ImputationGap, PriorMatchesClosedForm) {
  const double eps = 0.01;
  const ClassPrior p = imputation_gap_prior(eps);
  EXPECT_NEAR(std::exp(p.log_probs[0]), (2.0 - eps) / 3.0, 1e-15);
  EXPECT_NEAR(std::exp(p.log_probs[1]), (1.0 + eps) / 3.0, 1e-15);
}

TEST(Batch, MatchesSingleInstanceAndThreads) {
  const Network net = tiny_net(30, true, 8);
  Rng rng(31);
  std::vector<MaskedInstance> xs;
  for (int k = 0; k < 25; ++k) xs.push_back(oracle::random_instance(net, 0.4, rng));
  const ClassPrior prior = ClassPrior::uniform(2);
  const auto one = batch_predict(net, xs, prior, {1, {}});
  const auto four = batch_predict(net, xs, prior, {4, {}});
  EXPECT_EQ(one, four);
  for (std::size_t k = 0; k < xs.size(); ++k) EXPECT_EQ(one[k], predict(net, xs[k], prior));
  const auto p1 = batch_posteriors(net, xs, prior, {1, {}});
  const auto p4 = batch_posteriors(net, xs, prior, {4, {}});
  EXPECT_EQ(p1, p4);
}

TEST(Batch, Accuracy) {
  const std::vector<std::size_t> pred{0, 1, 1, 0}, labels{0, 1, 0, 0};
  EXPECT_DOUBLE_EQ(accuracy(pred, labels), 0.75);
}

TEST(TranslationEnsemble, ShiftMarksShiftedInPixelsMissing) {
  // 2x2 grid of 1x1 patches.
  const MaskedInstance x = MaskedInstance::complete(4, 1, {1, 2, 3, 4});
  const MaskedInstance s = shift_instance(x, 2, 2, PatchShape{1, 1}, 0, 1);
  EXPECT_EQ(s.observed, (std::vector<std::uint8_t>{0, 1, 0, 1}));
  EXPECT_EQ(s.values[1], 1.0);
  EXPECT_EQ(s.values[3], 3.0);
  EXPECT_EQ(shift_instance(x, 2, 2, PatchShape{1, 1}, 0, 0), x);
}

TEST(TranslationEnsemble, RadiusZeroIsPlainInference) {
  Rng rng(32);
  oracle::RandomNetSpec spec;
  spec.grid_height = 2;
  spec.grid_width = 2;
  const Network net = oracle::random_network(spec, rng);
  std::vector<MaskedInstance> xs{oracle::random_instance(net, 0.0, rng), oracle::random_instance(net, 0.2, rng)};
  BatchOptions opt;
  opt.ensemble = {true, 2, 2, 0};
  const auto a = batch_posteriors(net, xs, ClassPrior::uniform(2), opt);
  const auto b = batch_posteriors(net, xs, ClassPrior::uniform(2));
  for (std::size_t k = 0; k < 2; ++k)
    for (std::size_t y = 0; y < 2; ++y) EXPECT_NEAR(a[k][y], b[k][y], 1e-12);
  opt.ensemble.radius = 1;
  for (const auto& p : batch_posteriors(net, xs, ClassPrior::uniform(2), opt)) EXPECT_NEAR(logsumexp(p), 0.0, 1e-12);
}

TEST(PredictionCsv, HeaderAndRows) {
  const std::vector<MaskedInstance> xs{MaskedInstance::complete(2, 1, {0, 1})};
  const std::vector<std::vector<double>> post{{std::log(0.25), std::log(0.75)}};
  const std::vector<std::size_t> labels{1};
  std::ostringstream out;
  write_prediction_csv(out, xs, post, labels);
  const std::string s = out.str();
  EXPECT_EQ(s.rfind("# tmmkit-csv v1\nid,mask_density,log_posterior_0,log_posterior_1,predicted,label\n", 0), 0u);
  EXPECT_NE(s.find(",1,1\n"), std::string::npos);
}
