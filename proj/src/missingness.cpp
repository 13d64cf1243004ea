#include "tmm/missingness.hpp"

#include <algorithm>
#include <numeric>

#include "tmm/errors.hpp"

namespace tmm {

void MaskSpec::validate() const {
  if (kind == MaskKind::iid && !(probability >= 0.0 && probability <= 1.0)) {
    throw ConfigError("mask probability must lie in [0, 1]");
  }
}

std::vector<std::uint8_t> generate_mask(const MaskSpec& spec, const Image& image, Rng& rng) {
  spec.validate();
  const std::size_t n = image.height * image.width;
  if (image.pixels.size() != n) throw ShapeError("image buffer does not match its extents");
  std::vector<std::uint8_t> observed(n, 1);
  switch (spec.kind) {
    case MaskKind::iid:
      for (auto& m : observed) m = rng.bernoulli(spec.probability) ? 0 : 1;
      break;
    case MaskKind::rectangles: {
      if (spec.side == 0 || spec.rectangles == 0) break;
      const std::size_t h = std::min(spec.side, image.height), w = std::min(spec.side, image.width);
      for (std::size_t k = 0; k < spec.rectangles; ++k) {
        const std::size_t r0 = rng.uniform_int(image.height - h + 1);
        const std::size_t c0 = rng.uniform_int(image.width - w + 1);
        for (std::size_t r = r0; r < r0 + h; ++r)
          for (std::size_t c = c0; c < c0 + w; ++c) observed[r * image.width + c] = 0;
      }
      break;
    }
    case MaskKind::feature_deletion: {
      std::vector<std::size_t> nonzero;
      for (std::size_t k = 0; k < n; ++k)
        if (image.pixels[k] != 0.0) nonzero.push_back(k);
      const std::size_t take = std::min(spec.deletions, nonzero.size());
      for (std::size_t k = 0; k < take; ++k) {
        std::swap(nonzero[k], nonzero[k + rng.uniform_int(nonzero.size() - k)]);
        observed[nonzero[k]] = 0;
      }
      break;
    }
  }
  return observed;
}

Image apply_zeroing(const Image& image, std::span<const std::uint8_t> observed) {
  if (observed.size() != image.pixels.size()) throw ShapeError("mask does not match the image");
  Image out = image;
  for (std::size_t k = 0; k < observed.size(); ++k)
    if (!observed[k]) out.pixels[k] = 0.0;
  return out;
}

std::vector<double> coordinate_means(const Dataset& data) {
  if (data.empty()) return {};
  const std::size_t n = data.instances.front().values.size();
  std::vector<double> sum(n, 0.0), count(n, 0.0);
  for (const auto& x : data.instances) {
    if (x.values.size() != n) throw ShapeError("dataset instances differ in size");
    for (std::size_t k = 0; k < n; ++k)
      if (x.observed[k]) {
        sum[k] += x.values[k];
        count[k] += 1.0;
      }
  }
  for (std::size_t k = 0; k < n; ++k) sum[k] = count[k] > 0.0 ? sum[k] / count[k] : 0.0;
  return sum;
}

MaskedInstance impute(const MaskedInstance& x, ImputeMethod method, std::span<const double> means) {
  x.validate();
  if (method == ImputeMethod::mean && means.size() != x.values.size()) {
    throw ShapeError("mean imputation needs one statistic per coordinate");
  }
  MaskedInstance out = x;
  for (std::size_t k = 0; k < out.values.size(); ++k) {
    if (out.observed[k]) continue;
    out.values[k] = method == ImputeMethod::zero ? 0.0 : means[k];
    out.observed[k] = 1;
  }
  return out;
}

std::size_t knn_predict(const Dataset& train, const MaskedInstance& x, std::size_t k) {
  if (train.empty()) throw Error("k-nearest-neighbour vote over an empty training set");
  if (k == 0 || k > train.size()) throw Error("k must lie in [1, training set size]");
  x.validate();
  std::vector<double> dist(train.size(), 0.0);
  for (std::size_t i = 0; i < train.size(); ++i) {
    const auto& t = train.instances[i];
    if (t.values.size() != x.values.size()) throw ShapeError("training instance size differs from the query");
    double acc = 0.0;
    for (std::size_t c = 0; c < x.values.size(); ++c)
      if (x.observed[c]) {
        const double d = t.values[c] - x.values[c];
        acc += d * d;
      }
    dist[i] = acc;
  }
  std::vector<std::size_t> order(train.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k), order.end(),
                    [&](std::size_t a, std::size_t b) { return dist[a] < dist[b] || (dist[a] == dist[b] && a < b); });
  const std::size_t classes = *std::max_element(train.labels.begin(), train.labels.end()) + 1;
  std::vector<std::size_t> votes(classes, 0);
  for (std::size_t i = 0; i < k; ++i) ++votes[train.labels[order[i]]];
  return static_cast<std::size_t>(std::max_element(votes.begin(), votes.end()) - votes.begin());
}

void write_mask_pbm(std::ostream& out, std::size_t height, std::size_t width, std::span<const std::uint8_t> observed) {
  std::vector<std::uint8_t> bits(observed.size());
  for (std::size_t k = 0; k < bits.size(); ++k) bits[k] = observed[k] ? 0 : 1;
  write_pbm(out, height, width, bits);
}

}  // namespace tmm
