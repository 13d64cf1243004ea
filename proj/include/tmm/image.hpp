#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <vector>

namespace tmm {

/// Grayscale image with row-major pixels, nominally in [0, 1].
struct Image {
  std::size_t height = 0;
  std::size_t width = 0;
  std::vector<double> pixels;

  Image() = default;
  Image(std::size_t h, std::size_t w) : height(h), width(w), pixels(h * w, 0.0) {}

  double& operator()(std::size_t r, std::size_t c) { return pixels[r * width + c]; }
  double operator()(std::size_t r, std::size_t c) const { return pixels[r * width + c]; }

  friend bool operator==(const Image&, const Image&) = default;
};

/// Binary PGM (P5), maxval 255; values are clamped to [0, 1] and rounded.
void write_pgm(std::ostream& out, const Image& image);

/// Binary PBM (P4) where `bits[r * width + c]` != 0 is drawn black.
void write_pbm(std::ostream& out, std::size_t height, std::size_t width, std::span<const std::uint8_t> bits);

/// Tiles equally sized images row by row with `columns` per row and a
/// one-pixel mid-gray border between tiles.
Image montage(std::span<const Image> tiles, std::size_t columns);

/// Rescales pixels linearly so that min -> 0 and max -> 1 (constant images become 0.5).
Image stretch_contrast(const Image& image);

}  // namespace tmm
