#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

#include "tmm/image.hpp"
#include "tmm/instance.hpp"
#include "tmm/rng.hpp"

namespace tmm {

enum class MaskKind { iid, rectangles, feature_deletion };

struct MaskSpec {
  MaskKind kind = MaskKind::iid;
  double probability = 0.0;     ///< iid: chance that a pixel is missing
  std::size_t rectangles = 0;   ///< rectangles: how many
  std::size_t side = 0;         ///< rectangles: width and height W
  std::size_t deletions = 0;    ///< feature_deletion: N_del

  static MaskSpec iid(double p) { return {MaskKind::iid, p, 0, 0, 0}; }
  static MaskSpec rects(std::size_t n, std::size_t w) { return {MaskKind::rectangles, 0.0, n, w, 0}; }
  static MaskSpec feature_deletion(std::size_t n) { return {MaskKind::feature_deletion, 0.0, 0, 0, n}; }

  /// Throws ConfigError for p outside [0, 1].
  void validate() const;
};

/// Observation flags (1 = observed) over the pixels of `image`.
///
/// - iid: every pixel is missing independently with probability p.
/// - rectangles: n squares of side W with top-left corners uniform over the
///   positions that keep the square inside the image (W is clipped to the
///   image extents); their union is missing.
/// - feature_deletion: min(N_del, #non-zero) non-zero pixels chosen uniformly
///   without replacement are missing.
std::vector<std::uint8_t> generate_mask(const MaskSpec& spec, const Image& image, Rng& rng);

/// Pixels under a 0 flag set to zero: what a classifier that cannot see the
/// mask receives after feature deletion.
Image apply_zeroing(const Image& image, std::span<const std::uint8_t> observed);

enum class ImputeMethod { zero, mean };

/// Per-coordinate mean of the observed values over a dataset (0 where never observed).
std::vector<double> coordinate_means(const Dataset& data);

/// Missing coordinates replaced (zero, or `means` for ImputeMethod::mean) and
/// marked observed; observed coordinates are untouched.
MaskedInstance impute(const MaskedInstance& x, ImputeMethod method, std::span<const double> means = {});

/// k-nearest-neighbour vote under Σ over observed coordinates of (x'_i - x_i)².
/// Neighbours are ordered by distance, then training-set order; vote ties go
/// to the smallest class.
std::size_t knn_predict(const Dataset& train, const MaskedInstance& x, std::size_t k);

/// Mask dump as PBM with missing pixels drawn black.
void write_mask_pbm(std::ostream& out, std::size_t height, std::size_t width, std::span<const std::uint8_t> observed);

}  // namespace tmm
