#include "tmm/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "tmm/errors.hpp"

namespace tmm {

std::size_t checked_element_count(std::span<const std::size_t> dims, std::size_t budget) {
  std::size_t count = 1;
  for (std::size_t d : dims) {
    if (d == 0) throw ShapeError("tensor mode of dimension zero");
    if (count > budget / d) {
      throw CapacityError("dense tensor exceeds element budget of " + std::to_string(budget));
    }
    count *= d;
  }
  return count;
}

DenseTensor::DenseTensor(std::vector<std::size_t> dims, std::size_t budget)
    : dims_(std::move(dims)), entries_(checked_element_count(dims_, budget), 0.0) {}

DenseTensor::DenseTensor(std::vector<std::size_t> dims, std::vector<double> entries)
    : dims_(std::move(dims)), entries_(std::move(entries)) {
  const std::size_t expected = checked_element_count(dims_, SIZE_MAX);
  if (entries_.size() != expected) {
    throw ShapeError("tensor entries length " + std::to_string(entries_.size()) + " != product of dims " +
                     std::to_string(expected));
  }
}

DenseTensor DenseTensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return DenseTensor({n}, std::move(values));
}

std::size_t DenseTensor::offset(std::span<const std::size_t> index) const {
  if (index.size() != dims_.size()) throw ShapeError("index order does not match tensor order");
  std::size_t off = 0;
  for (std::size_t k = 0; k < dims_.size(); ++k) {
    if (index[k] >= dims_[k]) throw ShapeError("tensor index out of range");
    off = off * dims_[k] + index[k];
  }
  return off;
}

bool DenseTensor::is_distribution(double tol) const {
  for (double v : entries_) {
    if (!(v >= 0.0)) return false;
  }
  return std::abs(sum() - 1.0) <= tol;
}

double DenseTensor::sum() const { return std::accumulate(entries_.begin(), entries_.end(), 0.0); }

DenseTensor tensor_product(const DenseTensor& a, const DenseTensor& b, std::size_t budget) {
  std::vector<std::size_t> dims = a.dims();
  dims.insert(dims.end(), b.dims().begin(), b.dims().end());
  DenseTensor out(std::move(dims), budget);
  auto dst = out.entries();
  const auto lhs = a.entries();
  const auto rhs = b.entries();
  // Row-major: the trailing modes (b's) vary fastest.
  for (std::size_t i = 0; i < lhs.size(); ++i) {
    for (std::size_t j = 0; j < rhs.size(); ++j) dst[i * rhs.size() + j] = lhs[i] * rhs[j];
  }
  return out;
}

DenseTensor permute_modes(const DenseTensor& a, std::span<const std::size_t> perm) {
  const std::size_t n = a.order();
  if (perm.size() != n) throw ShapeError("permutation length does not match tensor order");
  std::vector<bool> seen(n, false);
  for (std::size_t p : perm) {
    if (p >= n || seen[p]) throw ShapeError("invalid mode permutation");
    seen[p] = true;
  }
  std::vector<std::size_t> dims(n);
  for (std::size_t k = 0; k < n; ++k) dims[k] = a.dims()[perm[k]];

  // Strides of the source modes, re-ordered to follow the output modes.
  std::vector<std::size_t> src_stride(n, 1);
  for (std::size_t k = n; k-- > 1;) src_stride[k - 1] = src_stride[k] * a.dims()[k];
  std::vector<std::size_t> stride(n);
  for (std::size_t k = 0; k < n; ++k) stride[k] = src_stride[perm[k]];

  std::vector<double> out(a.size());
  std::vector<std::size_t> idx(n, 0);
  const auto src = a.entries();
  std::size_t src_off = 0;
  for (std::size_t flat = 0; flat < out.size(); ++flat) {
    out[flat] = src[src_off];
    for (std::size_t k = n; k-- > 0;) {
      if (++idx[k] < dims[k]) {
        src_off += stride[k];
        break;
      }
      src_off -= stride[k] * (dims[k] - 1);
      idx[k] = 0;
    }
  }
  return DenseTensor(std::move(dims), std::move(out));
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix kronecker(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows * b.rows, a.cols * b.cols);
  for (std::size_t i = 0; i < a.rows; ++i)
    for (std::size_t j = 0; j < a.cols; ++j)
      for (std::size_t k = 0; k < b.rows; ++k)
        for (std::size_t l = 0; l < b.cols; ++l) out(i * b.rows + k, j * b.cols + l) = a(i, j) * b(k, l);
  return out;
}

Matrix matricize(const DenseTensor& a) {
  const std::size_t n = a.order();
  if (n % 2 != 0) throw ShapeError("matricization needs an even tensor order, got " + std::to_string(n));
  const auto& dims = a.dims();
  std::size_t rows = 1;
  std::size_t cols = 1;
  for (std::size_t k = 0; k < n; k += 2) {
    rows *= dims[k];
    cols *= dims[k + 1];
  }
  Matrix out(rows, cols);
  std::vector<std::size_t> idx(n, 0);
  const auto src = a.entries();
  for (std::size_t flat = 0; flat < src.size(); ++flat) {
    std::size_t r = 0;
    std::size_t c = 0;
    for (std::size_t k = 0; k < n; k += 2) {
      r = r * dims[k] + idx[k];
      c = c * dims[k + 1] + idx[k + 1];
    }
    out(r, c) = src[flat];
    for (std::size_t k = n; k-- > 0;) {
      if (++idx[k] < dims[k]) break;
      idx[k] = 0;
    }
  }
  return out;
}

std::vector<double> singular_values(const Matrix& m) {
  // One-sided Jacobi on the columns of A (or of Aᵀ when wide).
  const bool wide = m.cols > m.rows;
  const std::size_t rows = wide ? m.cols : m.rows;
  const std::size_t cols = wide ? m.rows : m.cols;
  // Column-major working copy: u[c * rows + r].
  std::vector<double> u(rows * cols);
  for (std::size_t r = 0; r < m.rows; ++r)
    for (std::size_t c = 0; c < m.cols; ++c) {
      if (wide)
        u[r * rows + c] = m(r, c);
      else
        u[c * rows + r] = m(r, c);
    }

  constexpr double kEps = 1e-15;
  for (int sweep = 0; sweep < 100; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < cols; ++p) {
      for (std::size_t q = p + 1; q < cols; ++q) {
        double* up = &u[p * rows];
        double* uq = &u[q * rows];
        double alpha = 0.0;
        double beta = 0.0;
        double gamma = 0.0;
        for (std::size_t i = 0; i < rows; ++i) {
          alpha += up[i] * up[i];
          beta += uq[i] * uq[i];
          gamma += up[i] * uq[i];
        }
        if (gamma == 0.0 || std::abs(gamma) <= kEps * std::sqrt(alpha * beta)) continue;
        rotated = true;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double cs = 1.0 / std::sqrt(1.0 + t * t);
        const double sn = cs * t;
        for (std::size_t i = 0; i < rows; ++i) {
          const double a = up[i];
          const double b = uq[i];
          up[i] = cs * a - sn * b;
          uq[i] = sn * a + cs * b;
        }
      }
    }
    if (!rotated) break;
  }

  std::vector<double> sigma(cols);
  for (std::size_t c = 0; c < cols; ++c) {
    double s = 0.0;
    for (std::size_t i = 0; i < rows; ++i) s += u[c * rows + i] * u[c * rows + i];
    sigma[c] = std::sqrt(s);
  }
  std::sort(sigma.begin(), sigma.end(), std::greater<>());
  return sigma;
}

std::size_t numeric_rank(const Matrix& m, double tol) {
  if (!(tol > 0.0)) throw Error("numeric_rank: tolerance must be positive");
  const auto sigma = singular_values(m);
  if (sigma.empty() || sigma.front() == 0.0) return 0;
  const double cut = tol * sigma.front();
  return static_cast<std::size_t>(std::count_if(sigma.begin(), sigma.end(), [cut](double s) { return s > cut; }));
}

}  // namespace tmm
