#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <vector>

#include "tmm/image.hpp"
#include "tmm/inference.hpp"
#include "tmm/instance.hpp"
#include "tmm/network.hpp"
#include "tmm/rng.hpp"

namespace tmm {

/// Raw IDX array of unsigned bytes (dtype 0x08).
struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;

  /// Bytes divided by 255.
  [[nodiscard]] std::vector<double> scaled() const;

  friend bool operator==(const IdxArray&, const IdxArray&) = default;
};

/// Throws ParseError on a bad magic, an unsupported dtype or a truncated payload.
IdxArray read_idx(std::istream& in);
IdxArray load_idx(const std::filesystem::path& path);
void write_idx(std::ostream& out, const IdxArray& array);
void write_idx(const std::filesystem::path& path, const IdxArray& array);

/// Images from an order-3 IDX file, pixels in [0, 1].
std::vector<Image> load_idx_images(const std::filesystem::path& path);
/// Labels from an order-1 IDX file.
std::vector<std::size_t> load_idx_labels(const std::filesystem::path& path);

/// How an image of height x width maps onto a grid of patches; the grid may
/// extend past the image, in which case the extra pixels are padding.
struct PatchLayout {
  std::size_t image_height = 0;
  std::size_t image_width = 0;
  PatchShape patch;
  std::size_t grid_height = 0;
  std::size_t grid_width = 0;

  /// Smallest grid covering the image whose extents are multiples of `multiple`.
  static PatchLayout covering(std::size_t height, std::size_t width, PatchShape patch, std::size_t multiple = 1);

  [[nodiscard]] std::size_t positions() const { return grid_height * grid_width; }
  [[nodiscard]] std::size_t padded_height() const { return grid_height * patch.height; }
  [[nodiscard]] std::size_t padded_width() const { return grid_width * patch.width; }
};

/// Row-major patches, each flattened row-major. Padding pixels are zero and
/// missing; `observed` (optional, per image pixel) marks further missing pixels.
MaskedInstance patchify(const Image& image, const PatchLayout& layout, std::span<const std::uint8_t> observed = {});

/// Inverse of patchify on the image region; returns the pixels and their flags.
std::pair<Image, std::vector<std::uint8_t>> unpatchify(const MaskedInstance& x, const PatchLayout& layout);

/// Marks every padding coordinate of `x` missing and zero.
void mark_padding_missing(MaskedInstance& x, const PatchLayout& layout);

/// Labeled draws from a known model: Y from `prior`, then X from the model.
struct SynthSpec {
  const Network* model = nullptr;
  ClassPrior prior;
  std::size_t count = 0;
};

Dataset synth_dataset(const SynthSpec& spec, Rng& rng);

/// "id,label" rows under the versioned header.
void write_labels_csv(std::ostream& out, std::span<const std::size_t> labels);

}  // namespace tmm
