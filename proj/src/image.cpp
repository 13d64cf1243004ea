#include "tmm/image.hpp"

#include <algorithm>
#include <cmath>
#include <ostream>

#include "tmm/errors.hpp"

namespace tmm {

void write_pgm(std::ostream& out, const Image& image) {
  if (image.pixels.size() != image.height * image.width) throw ShapeError("image buffer does not match its extents");
  out << "P5\n" << image.width << ' ' << image.height << "\n255\n";
  std::vector<char> bytes(image.pixels.size());
  for (std::size_t k = 0; k < bytes.size(); ++k) {
    const double v = std::clamp(image.pixels[k], 0.0, 1.0);
    bytes[k] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
  }
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void write_pbm(std::ostream& out, std::size_t height, std::size_t width, std::span<const std::uint8_t> bits) {
  if (bits.size() != height * width) throw ShapeError("bitmap does not match its extents");
  out << "P4\n" << width << ' ' << height << '\n';
  const std::size_t stride = (width + 7) / 8;
  std::vector<char> row(stride);
  for (std::size_t r = 0; r < height; ++r) {
    std::fill(row.begin(), row.end(), 0);
    for (std::size_t c = 0; c < width; ++c)
      if (bits[r * width + c]) row[c / 8] = static_cast<char>(row[c / 8] | (0x80 >> (c % 8)));
    out.write(row.data(), static_cast<std::streamsize>(stride));
  }
}

Image montage(std::span<const Image> tiles, std::size_t columns) {
  if (tiles.empty()) return {};
  if (columns == 0) throw Error("montage needs at least one column");
  const std::size_t h = tiles.front().height, w = tiles.front().width;
  for (const auto& t : tiles)
    if (t.height != h || t.width != w) throw ShapeError("montage tiles differ in size");
  const std::size_t cols = std::min(columns, tiles.size());
  const std::size_t rows = (tiles.size() + cols - 1) / cols;
  Image out(rows * (h + 1) - 1, cols * (w + 1) - 1);
  std::fill(out.pixels.begin(), out.pixels.end(), 0.5);
  for (std::size_t k = 0; k < tiles.size(); ++k) {
    const std::size_t r0 = (k / cols) * (h + 1), c0 = (k % cols) * (w + 1);
    for (std::size_t r = 0; r < h; ++r)
      for (std::size_t c = 0; c < w; ++c) out(r0 + r, c0 + c) = tiles[k](r, c);
  }
  return out;
}

Image stretch_contrast(const Image& image) {
  Image out = image;
  if (image.pixels.empty()) return out;
  const auto [lo, hi] = std::minmax_element(image.pixels.begin(), image.pixels.end());
  const double range = *hi - *lo;
  for (double& v : out.pixels) v = range > 0.0 ? (v - *lo) / range : 0.5;
  return out;
}

}  // namespace tmm
