#include <gtest/gtest.h>

#include <cmath>

#include "tmm/errors.hpp"
#include "tmm/logspace.hpp"
#include "tmm/network.hpp"
#include "tmm/oracle.hpp"

using namespace tmm;
using oracle::Family;
using oracle::RandomNetSpec;

namespace {

Network categorical_net(std::uint64_t seed, bool deep = true, std::size_t n = 4, std::size_t dim = 1,
                        std::size_t alphabet = 2, Sharing sharing = Sharing::unshared) {
  Rng rng(seed);
  RandomNetSpec spec;
  spec.deep = deep;
  spec.grid_width = n;
  spec.dim = dim;
  spec.alphabet = alphabet;
  spec.sharing = sharing;
  spec.family = Family::categorical;
  return oracle::random_network(spec, rng);
}

Activation constant_activation(std::size_t h, std::size_t w, std::size_t c, double v) {
  Activation a(h, w, c);
  std::fill(a.values.begin(), a.values.end(), v);
  return a;
}

}  // namespace

TEST(Representation, AllMissingIsZero) {
  const Network net = categorical_net(1);
  MaskedInstance x(4, 1);
  std::fill(x.observed.begin(), x.observed.end(), 0);
  const Activation rep = net.representation(x);
  for (double v : rep.values) EXPECT_EQ(v, 0.0);
}

TEST(Representation, FullyObservedDelegatesToComponents) {
  const Network net = categorical_net(2, true, 4, 2, 3);
  const MaskedInstance x = MaskedInstance::complete(4, 2, {0, 1, 2, 2, 1, 0, 1, 1});
  const Activation rep = net.representation(x);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t d = 0; d < net.components().count(); ++d)
      EXPECT_EQ(rep.at(i)[d], net.components().log_density(d, x.patch(i), x.patch_mask(i)));
}

TEST(Representation, HalfMissingPatchIsCompletionSum) {
  const Network net = categorical_net(3, true, 2, 2, 3);
  MaskedInstance x = MaskedInstance::complete(2, 2, {2, 1, 0, 1});
  x.observed[1] = 0;
  const Activation rep = net.representation(x);
  for (std::size_t d = 0; d < net.components().count(); ++d) {
    std::vector<double> terms;
    for (std::size_t v = 0; v < 3; ++v) {
      MaskedInstance full = x;
      full.observed[1] = 1;
      full.values[1] = static_cast<double>(v);
      terms.push_back(net.representation(full).at(0)[d]);
    }
    EXPECT_NEAR(rep.at(0)[d], logsumexp(terms), 1e-12);
  }
}

TEST(MexLayer, UniformOffsetsKeepConstant) {
  LevelWeights w(1, 3, 4);
  std::fill(w.log_w.begin(), w.log_w.end(), -std::log(4.0));
  const std::vector<std::size_t> slots(2, 0);
  const Activation out = mex_layer(constant_activation(1, 2, 4, -3.25), w, slots);
  ASSERT_EQ(out.channels, 3u);
  for (double v : out.values) EXPECT_NEAR(v, -3.25, 1e-14);
}

TEST(MexLayer, OneHotOffsetsSelectChannel) {
  LevelWeights w(1, 1, 3);
  w.log_w = {0.0, -kInf, -kInf};
  Activation in(1, 1, 3);
  in.values = {-1.5, 2.0, 0.3};
  const std::vector<std::size_t> slots{0};
  for (bool norm : {true, false}) EXPECT_NEAR(mex_layer(in, w, slots, norm).values[0], -1.5, 1e-14);
}

TEST(MexLayer, MatchesLinearSpace) {
  Rng rng(4);
  LevelWeights w(2, 2, 3);
  for (std::size_t s = 0; s < 2; ++s)
    for (std::size_t g = 0; g < 2; ++g) {
      auto v = w.vec(s, g);
      for (double& x : v) x = rng.normal();
      const auto n = normalize_to_simplex(v);
      std::copy(n.begin(), n.end(), v.begin());
    }
  Activation in(1, 2, 3);
  for (double& v : in.values) v = rng.normal();
  const std::vector<std::size_t> slots{1, 0};
  const Activation out = mex_layer(in, w, slots);
  for (std::size_t j = 0; j < 2; ++j)
    for (std::size_t g = 0; g < 2; ++g) {
      double lin = 0.0;
      for (std::size_t a = 0; a < 3; ++a) lin += std::exp(w.vec(slots[j], g)[a]) * std::exp(in.at(j)[a]);
      EXPECT_NEAR(out.at(j)[g], std::log(lin), 1e-14);
    }
}

TEST(MexLayer, ActivationNormSurvivesUnderflow) {
  LevelWeights w(1, 1, 2);
  w.log_w = {std::log(0.25), std::log(0.75)};
  Activation in(1, 1, 2);
  in.values = {-2000.0, -2001.0};
  const std::vector<std::size_t> slots{0};
  const double want = -2000.0 + std::log(0.25 + 0.75 * std::exp(-1.0));
  EXPECT_NEAR(mex_layer(in, w, slots, true).values[0], want, 1e-10);
  EXPECT_NEAR(mex_layer(in, w, slots, false).values[0], want, 1e-10);
}

TEST(ProductPool, ZerosStayZero) {
  const Activation out = product_pool(constant_activation(2, 2, 3, 0.0), PoolWindow{2, 2});
  ASSERT_EQ(out.height * out.width, 1u);
  for (double v : out.values) EXPECT_EQ(v, 0.0);
}

TEST(ProductPool, UnitWindowIsIdentity) {
  Activation in(2, 3, 2);
  for (std::size_t k = 0; k < in.values.size(); ++k) in.values[k] = 0.1 * static_cast<double>(k) - 0.4;
  const Activation out = product_pool(in, PoolWindow{1, 1});
  EXPECT_EQ(out.values, in.values);
  EXPECT_EQ(out.height, 2u);
  EXPECT_EQ(out.width, 3u);
}

TEST(ProductPool, FourHalves) {
  const Activation out = product_pool(constant_activation(2, 2, 1, std::log(0.5)), PoolWindow{2, 2});
  EXPECT_NEAR(out.values[0], std::log(0.0625), 1e-15);
}

TEST(ProductPool, WindowMustTile) {
  EXPECT_THROW(product_pool(constant_activation(1, 3, 1, 0.0), PoolWindow{1, 2}), ShapeError);
}

TEST(Forward, MatchesDenseTensorOnFourPositions) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Network net = categorical_net(seed);
    Rng rng(seed + 100);
    const MaskedInstance x = oracle::random_instance(net, 0.0, rng);
    const auto out = net.forward(x);
    for (std::size_t y = 0; y < net.classes(); ++y) {
      EXPECT_LE(oracle::log_rel_error(out[y], oracle::dense_log_likelihood(net, x, y)), 1e-9);
    }
  }
}

TEST(Forward, GmmSparsePriorIsDiagonalGmm) {
  Rng rng(13);
  for (int trial = 0; trial < 10; ++trial) EXPECT_LE(oracle::gmm_equivalence_error(3, 2, 2, rng), 1e-9);
}

TEST(Forward, AllMissingGivesLogOne) {
  for (bool deep : {true, false}) {
    const Network net = categorical_net(5, deep, 8);
    MaskedInstance x(8, 1);
    std::fill(x.observed.begin(), x.observed.end(), 0);
    for (double v : net.forward(x)) EXPECT_NEAR(v, 0.0, 1e-12);
  }
}

TEST(Forward, NormalizedOverAllCompleteInputs) {
  for (bool deep : {true, false}) {
    const Network net = categorical_net(6, deep, 4, 1, 3);
    std::vector<double> total(net.classes(), 0.0);
    for (std::size_t code = 0; code < 81; ++code) {
      std::vector<double> v(4);
      std::size_t rest = code;
      for (double& x : v) {
        x = static_cast<double>(rest % 3);
        rest /= 3;
      }
      const auto out = net.forward(MaskedInstance::complete(4, 1, v));
      for (std::size_t y = 0; y < net.classes(); ++y) total[y] += std::exp(out[y]);
    }
    for (double t : total) EXPECT_NEAR(t, 1.0, 1e-6);
  }
}

TEST(Forward, ActivationNormIsNoOp) {
  Rng rng(7);
  for (int trial = 0; trial < 20; ++trial) {
    RandomNetSpec spec;
    spec.grid_width = 8;
    spec.family = trial % 2 ? Family::gaussian : Family::categorical;
    spec.sharing = trial % 3 == 0 ? Sharing::window : Sharing::unshared;
    spec.rank = 3;
    spec.dim = 2;
    const Network net = oracle::random_network(spec, rng);
    const MaskedInstance x = oracle::random_instance(net, 0.3, rng);
    ForwardOptions on, off;
    off.activation_norm = false;
    const auto a = net.forward(x, on), b = net.forward(x, off);
    for (std::size_t y = 0; y < a.size(); ++y) EXPECT_NEAR(a[y], b[y], 1e-12 * std::max(1.0, std::abs(b[y])));
  }
}

TEST(Forward, MarginalConsistencyCategorical) {
  const Network net = categorical_net(8, true, 4, 1, 3);
  MaskedInstance x = MaskedInstance::complete(4, 1, {2, 0, 1, 1});
  x.observed[2] = 0;
  const auto marginal = net.forward(x);
  x.observed[2] = 1;
  for (std::size_t y = 0; y < net.classes(); ++y) {
    double total = 0.0;
    for (std::size_t v = 0; v < 3; ++v) {
      x.values[2] = static_cast<double>(v);
      total += std::exp(net.forward(x)[y]);
    }
    EXPECT_NEAR(std::exp(marginal[y]), total, 1e-12);
  }
}

TEST(Forward, MarginalConsistencyGaussianQuadrature) {
  Rng rng(9);
  RandomNetSpec spec;
  spec.family = Family::gaussian;
  spec.dim = 2;
  const Network net = oracle::random_network(spec, rng);
  MaskedInstance x = oracle::random_instance(net, 0.0, rng);
  x.observed[3] = 0;
  const auto out = net.forward(x);
  for (std::size_t y = 0; y < net.classes(); ++y) {
    EXPECT_LE(oracle::log_rel_error(out[y], oracle::quadrature_log_likelihood(net, x, 3, y)), 1e-6);
  }
}

TEST(Forward, SharedAndWindowSharingMatchDense) {
  for (Sharing s : {Sharing::shared, Sharing::window}) {
    const Network net = categorical_net(10, true, 8, 1, 2, s);
    Rng rng(11);
    const MaskedInstance x = oracle::random_instance(net, 0.25, rng);
    const auto out = net.forward(x);
    for (std::size_t y = 0; y < net.classes(); ++y)
      EXPECT_LE(oracle::log_rel_error(out[y], oracle::dense_log_likelihood(net, x, y)), 1e-9);
  }
}

TEST(Network, RejectsMismatchedParameters) {
  const Topology t = sequence_topology(2, {2, 2}, 2);
  HTParams p = HTParams::uniform(t, 3);
  EXPECT_THROW(Network(ComponentFamily::categorical(2, 1, 2), p), ShapeError);
  EXPECT_NO_THROW(Network(ComponentFamily::categorical(3, 1, 2), p));
}

TEST(Network, InstanceShapeChecked) {
  const Network net = categorical_net(12);
  EXPECT_THROW(net.forward(MaskedInstance(3, 1)), ShapeError);
}

TEST(RandomMarginalization, RateZeroIsIdentity) {
  Rng rng(1);
  const MaskedInstance x = MaskedInstance::complete(6, 2, std::vector<double>(12, 0.5));
  EXPECT_EQ(apply_random_marginalization(x, 0.0, rng), x);
  const Topology t = sequence_topology(2, {2, 2, 2}, 2);
  const std::vector<double> rates{0.0, 0.0};
  const MarginalizationSchedule s = random_marginalization(t, rates, rng);
  for (const auto& level : s.zeroed)
    for (auto z : level) EXPECT_EQ(z, 0);
}

TEST(RandomMarginalization, RateNearOneMarginalizesEverything) {
  Rng rng(2);
  const Network net = categorical_net(13, true, 8);
  const MaskedInstance x = oracle::random_instance(net, 0.0, rng);
  const MaskedInstance m = apply_random_marginalization(x, 1.0 - 1e-15, rng);
  for (auto o : m.observed) EXPECT_EQ(o, 0);
  for (double v : net.forward(m)) EXPECT_NEAR(v, 0.0, 1e-12);

  const std::vector<double> rates{1.0 - 1e-15};
  const MarginalizationSchedule s = random_marginalization(net.topology(), rates, rng);
  ForwardOptions opt;
  opt.schedule = &s;
  for (double v : net.forward(x, opt)) EXPECT_NEAR(v, 0.0, 1e-12);
}

TEST(RandomMarginalization, FractionMatchesRate) {
  Rng rng(3);
  const std::size_t n = 10000;
  const double rate = 0.3;
  const MaskedInstance x(n, 1);
  const MaskedInstance m = apply_random_marginalization(x, rate, rng);
  std::size_t zeroed = 0;
  for (auto o : m.observed) zeroed += o == 0;
  const double sd = std::sqrt(n * rate * (1 - rate));
  EXPECT_LE(std::abs(static_cast<double>(zeroed) - n * rate), 3 * sd);
}

TEST(RandomMarginalization, RejectsBadRate) {
  Rng rng(4);
  EXPECT_THROW(apply_random_marginalization(MaskedInstance(2, 1), 1.0, rng), Error);
  EXPECT_THROW(apply_random_marginalization(MaskedInstance(2, 1), -0.1, rng), Error);
}
