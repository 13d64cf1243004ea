#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace tmm {

/// Largest number of entries a dense tensor may hold unless overridden.
inline constexpr std::size_t kDefaultElementBudget = std::size_t{1} << 24;

/// Dense real tensor with row-major entries over (d_1, ..., d_N), 0-based indices.
///
/// An order-0 tensor is a scalar with a single entry.
class DenseTensor {
 public:
  DenseTensor() : entries_(1, 0.0) {}
  explicit DenseTensor(std::vector<std::size_t> dims, std::size_t budget = kDefaultElementBudget);
  DenseTensor(std::vector<std::size_t> dims, std::vector<double> entries);

  static DenseTensor scalar(double value) { return DenseTensor(std::vector<std::size_t>{}, std::vector<double>{value}); }
  static DenseTensor vector(std::vector<double> values);

  [[nodiscard]] std::size_t order() const { return dims_.size(); }
  [[nodiscard]] const std::vector<std::size_t>& dims() const { return dims_; }
  [[nodiscard]] std::size_t size() const { return entries_.size(); }

  [[nodiscard]] std::span<const double> entries() const { return entries_; }
  [[nodiscard]] std::span<double> entries() { return entries_; }

  [[nodiscard]] double at(std::span<const std::size_t> index) const { return entries_[offset(index)]; }
  double& at(std::span<const std::size_t> index) { return entries_[offset(index)]; }

  [[nodiscard]] std::size_t offset(std::span<const std::size_t> index) const;

  /// Non-negative entries summing to one within `tol`.
  [[nodiscard]] bool is_distribution(double tol = 1e-9) const;

  [[nodiscard]] double sum() const;

 private:
  std::vector<std::size_t> dims_;
  std::vector<double> entries_;
};

/// Product of extents, throwing CapacityError past `budget`.
std::size_t checked_element_count(std::span<const std::size_t> dims, std::size_t budget = kDefaultElementBudget);

/// (a ⊗ b)[d_1..d_{P+Q}] = a[d_1..d_P] · b[d_{P+1}..d_{P+Q}].
DenseTensor tensor_product(const DenseTensor& a, const DenseTensor& b, std::size_t budget = kDefaultElementBudget);

/// Output mode k is input mode perm[k].
DenseTensor permute_modes(const DenseTensor& a, std::span<const std::size_t> perm);

/// Row-major real matrix.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  static Matrix identity(std::size_t n);
};

Matrix kronecker(const Matrix& a, const Matrix& b);

/// Odd modes (1st, 3rd, ...) index rows, even modes index columns, each in
/// row-major order over its own modes. Requires an even order.
Matrix matricize(const DenseTensor& a);

/// Singular values in descending order (one-sided Jacobi).
std::vector<double> singular_values(const Matrix& m);

/// Count of singular values above tol·σ_max. Default tolerance matches the
/// almost-everywhere rank checks.
std::size_t numeric_rank(const Matrix& m, double tol = 1e-7);

}  // namespace tmm
