#include "tmm/data_io.hpp"

#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "tmm/errors.hpp"
#include "tmm/sampling.hpp"

namespace tmm {

namespace {

constexpr std::uint8_t kUnsignedByte = 0x08;

std::uint32_t read_be32(std::istream& in) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) throw ParseError("IDX header is truncated");
  return (std::uint32_t{b[0]} << 24) | (std::uint32_t{b[1]} << 16) | (std::uint32_t{b[2]} << 8) | std::uint32_t{b[3]};
}

void write_be32(std::ostream& out, std::uint32_t v) {
  const char b[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                     static_cast<char>(v)};
  out.write(b, 4);
}

}  // namespace

std::vector<double> IdxArray::scaled() const {
  std::vector<double> out(data.size());
  for (std::size_t k = 0; k < data.size(); ++k) out[k] = static_cast<double>(data[k]) / 255.0;
  return out;
}

IdxArray read_idx(std::istream& in) {
  unsigned char magic[4];
  if (!in.read(reinterpret_cast<char*>(magic), 4)) throw ParseError("IDX magic is truncated");
  if (magic[0] != 0 || magic[1] != 0) throw ParseError("bad IDX magic");
  if (magic[2] != kUnsignedByte) {
    throw ParseError("unsupported IDX dtype 0x" + std::to_string(static_cast<int>(magic[2])));
  }
  IdxArray a;
  std::size_t total = 1;
  for (std::size_t k = 0; k < magic[3]; ++k) {
    a.dims.push_back(read_be32(in));
    total *= a.dims.back();
  }
  a.data.resize(total);
  if (total > 0 && !in.read(reinterpret_cast<char*>(a.data.data()), static_cast<std::streamsize>(total))) {
    throw ParseError("IDX payload is truncated: expected " + std::to_string(total) + " bytes");
  }
  return a;
}

IdxArray load_idx(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return read_idx(in);
}

void write_idx(std::ostream& out, const IdxArray& a) {
  if (a.dims.size() > 255) throw ShapeError("IDX supports at most 255 dimensions");
  std::size_t total = 1;
  for (auto d : a.dims) total *= d;
  if (total != a.data.size()) throw ShapeError("IDX payload does not match its dimensions");
  const char magic[4] = {0, 0, static_cast<char>(kUnsignedByte), static_cast<char>(a.dims.size())};
  out.write(magic, 4);
  for (auto d : a.dims) write_be32(out, d);
  out.write(reinterpret_cast<const char*>(a.data.data()), static_cast<std::streamsize>(a.data.size()));
}

void write_idx(const std::filesystem::path& path, const IdxArray& a) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  write_idx(out, a);
}

std::vector<Image> load_idx_images(const std::filesystem::path& path) {
  const IdxArray a = load_idx(path);
  if (a.dims.size() != 3) throw ParseError("image file must have three dimensions");
  const std::size_t h = a.dims[1], w = a.dims[2];
  const auto values = a.scaled();
  std::vector<Image> out(a.dims[0], Image(h, w));
  for (std::size_t i = 0; i < out.size(); ++i)
    std::copy_n(values.begin() + static_cast<std::ptrdiff_t>(i * h * w), h * w, out[i].pixels.begin());
  return out;
}

std::vector<std::size_t> load_idx_labels(const std::filesystem::path& path) {
  const IdxArray a = load_idx(path);
  if (a.dims.size() != 1) throw ParseError("label file must have one dimension");
  return {a.data.begin(), a.data.end()};
}

PatchLayout PatchLayout::covering(std::size_t height, std::size_t width, PatchShape patch, std::size_t multiple) {
  if (patch.height == 0 || patch.width == 0 || multiple == 0) throw ShapeError("empty patch shape");
  auto round_up = [](std::size_t v, std::size_t m) { return (v + m - 1) / m * m; };
  PatchLayout l;
  l.image_height = height;
  l.image_width = width;
  l.patch = patch;
  l.grid_height = round_up(round_up(height, patch.height) / patch.height, multiple);
  l.grid_width = round_up(round_up(width, patch.width) / patch.width, multiple);
  return l;
}

MaskedInstance patchify(const Image& image, const PatchLayout& layout, std::span<const std::uint8_t> observed) {
  if (image.height != layout.image_height || image.width != layout.image_width) {
    throw ShapeError("image extents do not match the patch layout");
  }
  if (!observed.empty() && observed.size() != image.pixels.size()) throw ShapeError("mask does not match the image");
  const std::size_t s = layout.patch.size();
  MaskedInstance x(layout.positions(), s);
  for (std::size_t i = 0; i < layout.positions(); ++i) {
    const std::size_t pr = i / layout.grid_width, pc = i % layout.grid_width;
    for (std::size_t a = 0; a < layout.patch.height; ++a)
      for (std::size_t b = 0; b < layout.patch.width; ++b) {
        const std::size_t r = pr * layout.patch.height + a, c = pc * layout.patch.width + b;
        const std::size_t k = i * s + a * layout.patch.width + b;
        if (r < image.height && c < image.width) {
          x.values[k] = image(r, c);
          x.observed[k] = observed.empty() ? 1 : (observed[r * image.width + c] ? 1 : 0);
        } else {
          x.values[k] = 0.0;
          x.observed[k] = 0;
        }
      }
  }
  return x;
}

std::pair<Image, std::vector<std::uint8_t>> unpatchify(const MaskedInstance& x, const PatchLayout& layout) {
  if (x.positions != layout.positions() || x.dim != layout.patch.size()) {
    throw ShapeError("instance does not match the patch layout");
  }
  Image img(layout.image_height, layout.image_width);
  std::vector<std::uint8_t> mask(img.pixels.size(), 1);
  const std::size_t s = layout.patch.size();
  for (std::size_t r = 0; r < img.height; ++r)
    for (std::size_t c = 0; c < img.width; ++c) {
      const std::size_t i = (r / layout.patch.height) * layout.grid_width + c / layout.patch.width;
      const std::size_t k = i * s + (r % layout.patch.height) * layout.patch.width + c % layout.patch.width;
      img(r, c) = x.values[k];
      mask[r * img.width + c] = x.observed[k];
    }
  return {std::move(img), std::move(mask)};
}

void mark_padding_missing(MaskedInstance& x, const PatchLayout& layout) {
  if (x.positions != layout.positions() || x.dim != layout.patch.size()) {
    throw ShapeError("instance does not match the patch layout");
  }
  const std::size_t s = layout.patch.size();
  for (std::size_t i = 0; i < x.positions; ++i)
    for (std::size_t a = 0; a < layout.patch.height; ++a)
      for (std::size_t b = 0; b < layout.patch.width; ++b) {
        const std::size_t r = (i / layout.grid_width) * layout.patch.height + a;
        const std::size_t c = (i % layout.grid_width) * layout.patch.width + b;
        if (r >= layout.image_height || c >= layout.image_width) {
          const std::size_t k = i * s + a * layout.patch.width + b;
          x.values[k] = 0.0;
          x.observed[k] = 0;
        }
      }
}

Dataset synth_dataset(const SynthSpec& spec, Rng& rng) {
  if (spec.model == nullptr) throw Error("synthetic dataset needs a generating model");
  if (spec.prior.classes() != spec.model->classes()) throw ShapeError("prior and model disagree on the class count");
  Dataset d;
  d.instances.reserve(spec.count);
  d.labels.reserve(spec.count);
  for (std::size_t i = 0; i < spec.count; ++i) {
    const std::size_t y = rng.categorical_log(spec.prior.log_probs);
    d.instances.push_back(sample(*spec.model, y, rng));
    d.labels.push_back(y);
  }
  return d;
}

void write_labels_csv(std::ostream& out, std::span<const std::size_t> labels) {
  out << "# tmmkit-csv v1\n";
  out << "id,label\n";
  for (std::size_t i = 0; i < labels.size(); ++i) out << i << ',' << labels[i] << '\n';
}

}  // namespace tmm
