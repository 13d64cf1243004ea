#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "tmm/errors.hpp"
#include "tmm/factorization.hpp"
#include "tmm/rng.hpp"
#include "tmm/tensor.hpp"

using namespace tmm;

namespace {

DenseTensor random_tensor(std::vector<std::size_t> dims, Rng& rng) {
  DenseTensor t(std::move(dims));
  for (double& v : t.entries()) v = rng.normal();
  return t;
}

// Row and column of an entry under the odd/even mode split, computed from
// explicit strides rather than through matricize.
std::pair<std::size_t, std::size_t> split_index(const std::vector<std::size_t>& dims,
                                                const std::vector<std::size_t>& idx) {
  std::size_t row = 0, col = 0;
  for (std::size_t k = 0; k < dims.size(); ++k) {
    if (k % 2 == 0) {
      row = row * dims[k] + idx[k];
    } else {
      col = col * dims[k] + idx[k];
    }
  }
  return {row, col};
}

}  // namespace

TEST(TensorProduct, BasisVectors) {
  const DenseTensor t = tensor_product(DenseTensor::vector({1, 0}), DenseTensor::vector({0, 1}));
  ASSERT_EQ(t.dims(), (std::vector<std::size_t>{2, 2}));
  EXPECT_EQ(std::vector<double>(t.entries().begin(), t.entries().end()), (std::vector<double>{0, 1, 0, 0}));
}

TEST(TensorProduct, ScalarScales) {
  const DenseTensor t = tensor_product(DenseTensor::scalar(2.0), DenseTensor::vector({3, 4}));
  ASSERT_EQ(t.dims(), (std::vector<std::size_t>{2}));
  EXPECT_DOUBLE_EQ(t.entries()[0], 6.0);
  EXPECT_DOUBLE_EQ(t.entries()[1], 8.0);
}

TEST(TensorProduct, SimplexVectorsStayOnSimplex) {
  const DenseTensor t = tensor_product(DenseTensor::vector({0.5, 0.5}), DenseTensor::vector({0.3, 0.7}));
  const std::vector<double> want{0.15, 0.35, 0.15, 0.35};
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(t.entries()[k], want[k], 1e-15);
  EXPECT_TRUE(t.is_distribution());
}

TEST(TensorProduct, BudgetIsEnforced) {
  EXPECT_THROW(DenseTensor(std::vector<std::size_t>(30, 2), 1024), CapacityError);
  EXPECT_THROW(tensor_product(DenseTensor(std::vector<std::size_t>{64}), DenseTensor(std::vector<std::size_t>{64}), 100),
               CapacityError);
}

TEST(DenseTensor, EntriesMatchDims) {
  EXPECT_THROW(DenseTensor(std::vector<std::size_t>{2, 3}, std::vector<double>(5, 0.0)), ShapeError);
  const DenseTensor t(std::vector<std::size_t>{2, 3, 4});
  EXPECT_EQ(t.size(), 24u);
}

TEST(DenseTensor, DistributionFlag) {
  EXPECT_FALSE(DenseTensor::vector({0.5, 0.6}).is_distribution());
  EXPECT_FALSE(DenseTensor::vector({1.5, -0.5}).is_distribution());
  EXPECT_TRUE(DenseTensor::vector({0.25, 0.75}).is_distribution());
}

TEST(Matricize, MatrixIsItself) {
  const DenseTensor t(std::vector<std::size_t>{2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
  const Matrix m = matricize(t);
  ASSERT_EQ(m.rows, 2u);
  ASSERT_EQ(m.cols, 3u);
  EXPECT_EQ(m.data, (std::vector<double>{1, 2, 3, 4, 5, 6}));
}

TEST(Matricize, OrderFourIndexPlacement) {
  DenseTensor t(std::vector<std::size_t>{2, 2, 2, 2});
  // One-based entry (2,1,1,2) lands at one-based (row 3, col 2).
  const std::vector<std::size_t> idx{1, 0, 0, 1};
  t.at(idx) = 1.0;
  const Matrix m = matricize(t);
  EXPECT_EQ(m(2, 1), 1.0);
  EXPECT_DOUBLE_EQ(std::accumulate(m.data.begin(), m.data.end(), 0.0), 1.0);
}

TEST(Matricize, MatchesIndexEnumeration) {
  Rng rng(11);
  const std::vector<std::size_t> dims{2, 3, 3, 2};
  const DenseTensor t = random_tensor(dims, rng);
  const Matrix m = matricize(t);
  std::vector<std::size_t> idx(4, 0);
  for (std::size_t flat = 0; flat < t.size(); ++flat) {
    std::size_t rest = flat;
    for (std::size_t k = 4; k-- > 0;) {
      idx[k] = rest % dims[k];
      rest /= dims[k];
    }
    const auto [r, c] = split_index(dims, idx);
    EXPECT_EQ(m(r, c), t.entries()[flat]);
  }
}

TEST(Matricize, OddOrderRejected) {
  EXPECT_THROW(matricize(DenseTensor(std::vector<std::size_t>{2, 2, 2})), ShapeError);
}

TEST(Matricize, KroneckerIdentityOnRandomTensors) {
  Rng rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t m = 2 + rng.uniform_int(2);
    const DenseTensor a = random_tensor({m, 2}, rng);
    const DenseTensor b = random_tensor({2, m}, rng);
    const Matrix lhs = matricize(tensor_product(a, b));
    const Matrix rhs = kronecker(matricize(a), matricize(b));
    ASSERT_EQ(lhs.rows, rhs.rows);
    ASSERT_EQ(lhs.cols, rhs.cols);
    for (std::size_t k = 0; k < lhs.data.size(); ++k) EXPECT_NEAR(lhs.data[k], rhs.data[k], 1e-14);
  }
}

TEST(Matricize, KroneckerIdentityOrderFour) {
  Rng rng(6);
  const DenseTensor a = random_tensor({2, 2, 2, 2}, rng);
  const DenseTensor b = random_tensor({2, 2}, rng);
  const Matrix lhs = matricize(tensor_product(a, b));
  const Matrix rhs = kronecker(matricize(a), matricize(b));
  for (std::size_t k = 0; k < lhs.data.size(); ++k) EXPECT_NEAR(lhs.data[k], rhs.data[k], 1e-14);
}

TEST(Matricize, Linear) {
  Rng rng(7);
  const DenseTensor a = random_tensor({3, 2, 2, 3}, rng);
  const DenseTensor b = random_tensor({3, 2, 2, 3}, rng);
  const double alpha = 0.7, beta = -1.3;
  DenseTensor c(a.dims());
  for (std::size_t k = 0; k < c.size(); ++k) c.entries()[k] = alpha * a.entries()[k] + beta * b.entries()[k];
  const Matrix ma = matricize(a), mb = matricize(b), mc = matricize(c);
  for (std::size_t k = 0; k < mc.data.size(); ++k) EXPECT_NEAR(mc.data[k], alpha * ma.data[k] + beta * mb.data[k], 1e-14);
}

TEST(NumericRank, Identity) { EXPECT_EQ(numeric_rank(Matrix::identity(3), 1e-9), 3u); }

TEST(NumericRank, ZeroMatrix) { EXPECT_EQ(numeric_rank(Matrix(4, 5)), 0u); }

TEST(NumericRank, OuterProductIsRankOne) {
  Rng rng(3);
  Matrix m(8, 8);
  std::vector<double> u(8), v(8);
  for (auto& x : u) x = rng.normal();
  for (auto& x : v) x = rng.normal();
  for (std::size_t i = 0; i < 8; ++i)
    for (std::size_t j = 0; j < 8; ++j) m(i, j) = u[i] * v[j];
  EXPECT_EQ(numeric_rank(m), 1u);
}

TEST(NumericRank, SingularValuesOfDiagonal) {
  Matrix m(3, 3);
  m(0, 0) = 2.0;
  m(1, 1) = -5.0;
  m(2, 2) = 0.5;
  const auto s = singular_values(m);
  ASSERT_EQ(s.size(), 3u);
  EXPECT_NEAR(s[0], 5.0, 1e-14);
  EXPECT_NEAR(s[1], 2.0, 1e-14);
  EXPECT_NEAR(s[2], 0.5, 1e-14);
}

TEST(NumericRank, BoundsCpRankFromBelow) {
  Rng rng(21);
  for (std::size_t z = 1; z <= 3; ++z) {
    for (int trial = 0; trial < 10; ++trial) {
      const CPParams p = CPParams::random(4, 3, z, 1, false, rng);
      EXPECT_LE(numeric_rank(matricize(expand_cp(p, 0))), z);
    }
  }
}
