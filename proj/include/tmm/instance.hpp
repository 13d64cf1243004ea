#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace tmm {

/// An input X = (x_1, ..., x_N) of s-dimensional local structures together
/// with its observation mask (1 = observed). Values under a 0 flag are never
/// read by inference.
struct MaskedInstance {
  std::size_t positions = 0;
  std::size_t dim = 0;
  std::vector<double> values;
  std::vector<std::uint8_t> observed;

  MaskedInstance() = default;
  MaskedInstance(std::size_t n, std::size_t s) : positions(n), dim(s), values(n * s, 0.0), observed(n * s, 1) {}

  static MaskedInstance complete(std::size_t n, std::size_t s, std::vector<double> values);

  [[nodiscard]] std::span<const double> patch(std::size_t i) const { return {values.data() + i * dim, dim}; }
  [[nodiscard]] std::span<const std::uint8_t> patch_mask(std::size_t i) const { return {observed.data() + i * dim, dim}; }

  [[nodiscard]] double observed_fraction() const;
  /// Throws ShapeError when the buffers disagree with (positions, dim).
  void validate() const;

  friend bool operator==(const MaskedInstance&, const MaskedInstance&) = default;
};

/// Labeled collection of instances sharing (positions, dim).
struct Dataset {
  std::vector<MaskedInstance> instances;
  std::vector<std::size_t> labels;

  [[nodiscard]] std::size_t size() const { return instances.size(); }
  [[nodiscard]] bool empty() const { return instances.empty(); }
};

}  // namespace tmm
