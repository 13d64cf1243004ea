#include <gtest/gtest.h>

#include <cmath>

#include "tmm/errors.hpp"
#include "tmm/factorization.hpp"
#include "tmm/logspace.hpp"
#include "tmm/oracle.hpp"
#include "tmm/rng.hpp"
#include "tmm/tensor.hpp"

using namespace tmm;

namespace {

double w(std::span<const double> log_w, std::size_t k) { return std::exp(log_w[k]); }

}  // namespace

TEST(ExpandCp, RankOneIsOuterProduct) {
  Rng rng(1);
  const CPParams p = CPParams::random(2, 3, 1, 1, false, rng);
  const DenseTensor t = expand_cp(p, 0);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b) {
      const std::vector<std::size_t> idx{a, b};
      EXPECT_NEAR(t.at(idx), w(p.factor(0, 0), a) * w(p.factor(0, 1), b), 1e-15);
    }
}

TEST(ExpandCp, SumsToOne) {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const CPParams p = CPParams::random(3, 3, 1 + rng.uniform_int(3), 2, rng.bernoulli(0.5), rng);
    for (std::size_t y = 0; y < 2; ++y) EXPECT_TRUE(expand_cp(p, y).is_distribution(1e-9));
  }
}

TEST(ExpandCp, EntryByDirectSummation) {
  Rng rng(3);
  const CPParams p = CPParams::random(3, 2, 2, 1, false, rng);
  // One-based entry (1,2,1).
  double want = 0.0;
  for (std::size_t z = 0; z < 2; ++z) {
    want += w(p.top(0), z) * w(p.factor(z, 0), 0) * w(p.factor(z, 1), 1) * w(p.factor(z, 2), 0);
  }
  const std::vector<std::size_t> idx{0, 1, 0};
  EXPECT_NEAR(expand_cp(p, 0).at(idx), want, 1e-15);
}

TEST(ExpandHt, SingleLevelIsCp) {
  Rng rng(4);
  for (bool shared : {false, true}) {
    const CPParams cp = CPParams::random(4, 3, 2, 2, shared, rng);
    const HTParams ht = to_ht(cp);
    ASSERT_EQ(ht.topology.depth(), 1u);
    for (std::size_t y = 0; y < 2; ++y) {
      const DenseTensor a = expand_cp(cp, y), b = expand_ht(ht, y);
      for (std::size_t k = 0; k < a.size(); ++k) EXPECT_NEAR(a.entries()[k], b.entries()[k], 1e-12);
    }
  }
}

TEST(ExpandHt, SumsToOne) {
  Rng rng(5);
  for (Sharing s : {Sharing::unshared, Sharing::shared, Sharing::window}) {
    const Topology t = sequence_topology(2, {2, 3, 2}, 2, s);
    const HTParams p = HTParams::random(t, 2, rng);
    for (std::size_t y = 0; y < 2; ++y) EXPECT_TRUE(expand_ht(p, y).is_distribution(1e-9));
  }
}

TEST(ExpandHt, HandUnrolledTwoLevels) {
  Rng rng(6);
  const Topology t = sequence_topology(2, {2, 2}, 1);
  const HTParams p = HTParams::random(t, 2, rng);
  const LevelWeights& l0 = p.levels[0];
  const LevelWeights& l1 = p.levels[1];
  auto a0 = [&](std::size_t j, std::size_t g, std::size_t d) { return std::exp(l0.vec(t.slot(0, j), g)[d]); };
  auto a1 = [&](std::size_t j, std::size_t g, std::size_t a) { return std::exp(l1.vec(t.slot(1, j), g)[a]); };
  auto top = [&](std::size_t b) { return std::exp(p.top.vec(0, 0)[b]); };
  const DenseTensor got = expand_ht(p, 0);
  for (std::size_t d1 = 0; d1 < 2; ++d1)
    for (std::size_t d2 = 0; d2 < 2; ++d2)
      for (std::size_t d3 = 0; d3 < 2; ++d3)
        for (std::size_t d4 = 0; d4 < 2; ++d4) {
          double want = 0.0;
          for (std::size_t b = 0; b < 2; ++b) {
            for (std::size_t a = 0; a < 2; ++a) {
              for (std::size_t c = 0; c < 2; ++c) {
                want += top(b) * a1(0, b, a) * a1(1, b, c) * a0(0, a, d1) * a0(1, a, d2) * a0(2, c, d3) *
                        a0(3, c, d4);
              }
            }
          }
          const std::vector<std::size_t> idx{d1, d2, d3, d4};
          EXPECT_NEAR(got.at(idx), want, 1e-15);
        }
}

TEST(ExpandHt, ParamsOnSimplex) {
  Rng rng(7);
  const Topology t = sequence_topology(2, {3, 2}, 3);
  HTParams p = HTParams::random(t, 4, rng);
  EXPECT_LE(p.normalization_error(), 1e-9);
  EXPECT_EQ(p.levels.size(), 2u);
  p.levels[0].log_w[0] += 0.5;
  EXPECT_GT(p.normalization_error(), 1e-3);
  p.normalize();
  EXPECT_LE(p.normalization_error(), 1e-9);
}

TEST(Topology, RejectsNonTilingGrid) {
  Topology t;
  t.grid_width = 6;
  t.levels = {LevelSpec{2, Sharing::unshared, PoolWindow{1, 4}}};
  EXPECT_THROW(t.validate(), ShapeError);
  t.levels = {LevelSpec{2, Sharing::unshared, PoolWindow{1, 2}}};
  EXPECT_THROW(t.validate(), ShapeError);
  t.levels.push_back(LevelSpec{2, Sharing::unshared, PoolWindow{1, 3}});
  EXPECT_NO_THROW(t.validate());
}

TEST(GmmSparsePrior, SingleComponent) {
  const std::vector<double> weights{1.0};
  const DenseTensor t = gmm_sparse_prior(weights, 3);
  std::size_t nonzero = 0;
  for (double v : t.entries()) nonzero += v != 0.0;
  EXPECT_EQ(nonzero, 1u);
  EXPECT_DOUBLE_EQ(t.sum(), 1.0);
}

TEST(GmmSparsePrior, TwoComponentsTwoPositions) {
  const std::vector<double> weights{0.3, 0.7};
  const DenseTensor t = gmm_sparse_prior(weights, 2);
  ASSERT_EQ(t.dims(), (std::vector<std::size_t>{4, 4}));
  // One-based (1,2) and (3,4).
  EXPECT_DOUBLE_EQ(t.at(std::vector<std::size_t>{0, 1}), 0.3);
  EXPECT_DOUBLE_EQ(t.at(std::vector<std::size_t>{2, 3}), 0.7);
  std::size_t nonzero = 0;
  for (double v : t.entries()) nonzero += v != 0.0;
  EXPECT_EQ(nonzero, 2u);
}

TEST(GmmSparsePrior, SumsToOneAndMatchesCpForm) {
  const std::vector<double> weights{0.1, 0.2, 0.3, 0.4};
  const DenseTensor t = gmm_sparse_prior(weights, 2);
  EXPECT_TRUE(t.is_distribution());
  const DenseTensor c = expand_cp(gmm_cp_params(weights, 2), 0);
  for (std::size_t k = 0; k < t.size(); ++k) EXPECT_NEAR(t.entries()[k], c.entries()[k], 1e-15);
}

TEST(NormalizeToSimplex, Uniform) {
  const auto out = normalize_to_simplex(std::vector<double>{0.0, 0.0});
  EXPECT_NEAR(out[0], -std::log(2.0), 1e-15);
  EXPECT_NEAR(out[1], -std::log(2.0), 1e-15);
}

TEST(NormalizeToSimplex, Idempotent) {
  const std::vector<double> in{std::log(0.2), std::log(0.5), std::log(0.3)};
  const auto out = normalize_to_simplex(in);
  for (std::size_t k = 0; k < 3; ++k) EXPECT_NEAR(out[k], in[k], 1e-12);
}

TEST(NormalizeToSimplex, Softmax) {
  const auto out = normalize_to_simplex(std::vector<double>{1.0, 2.0, 3.0});
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  for (int k = 0; k < 3; ++k) EXPECT_NEAR(std::exp(out[k]), std::exp(k + 1.0) / z, 1e-15);
  EXPECT_NEAR(logsumexp(out), 0.0, 1e-15);
}

TEST(DepthEfficiency, FullRankAlmostAlways) {
  Rng rng(2024);
  std::size_t full = 0;
  for (int trial = 0; trial < 100; ++trial) full += oracle::depth_efficiency_rank(rng) == 4;
  EXPECT_GE(full, 99u);
}
