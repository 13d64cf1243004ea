#include "tmm/sampling.hpp"

#include <ostream>
#include <string>

#include "tmm/errors.hpp"

namespace tmm {

namespace {

std::span<const double> weight_vector(const Network& net, std::size_t k, std::size_t j, std::size_t gamma) {
  const HTParams& p = net.params();
  if (k == p.topology.depth()) return p.top.vec(0, gamma);
  return p.levels[k].vec(p.topology.slot(k, j), gamma);
}

// Walks down from node (k, j, γ), choosing each input channel with `choose`
// and recording the component reached at every leaf patch.
template <typename Choose>
void descend(const Network& net, std::size_t k, std::size_t j, std::size_t gamma, Choose& choose,
             std::vector<std::size_t>& leaves) {
  const std::size_t alpha = choose(weight_vector(net, k, j, gamma));
  if (k == 0) {
    leaves[j] = alpha;
    return;
  }
  for (std::size_t c : net.topology().children(k - 1, j)) descend(net, k - 1, c, alpha, choose, leaves);
}

std::size_t greedy_choice(std::span<const double> w) {
  std::size_t best = 0;
  for (std::size_t a = 1; a < w.size(); ++a)
    if (w[a] > w[best]) best = a;
  return best;
}

void check_neuron(const Network& net, const NeuronRef& n) {
  const Topology& t = net.topology();
  const std::size_t depth = t.depth();
  if (n.layer > depth + 1) throw ShapeError("layer " + std::to_string(n.layer) + " does not exist");
  std::size_t positions = 0, channels = 0;
  if (n.layer == 0) {
    positions = t.positions();
    channels = net.components().count();
  } else if (n.layer <= depth) {
    positions = t.level_positions(n.layer - 1);
    channels = t.levels[n.layer - 1].width;
  } else {
    positions = 1;
    channels = t.classes;
  }
  if (n.position >= positions) throw ShapeError("neuron position out of range");
  if (n.channel >= channels) throw ShapeError("neuron channel out of range");
}

// Level-grid index of the weights a neuron owns, or none for the representation.
std::size_t weight_level(const NeuronRef& n) { return n.layer - 1; }

}  // namespace

std::vector<std::size_t> sample_assignment(const Network& net, std::size_t y, Rng& rng) {
  if (y >= net.classes()) throw ShapeError("class index out of range");
  std::vector<std::size_t> leaves(net.positions(), 0);
  auto draw = [&](std::span<const double> w) { return rng.categorical_log(w); };
  descend(net, net.topology().depth(), 0, y, draw, leaves);
  return leaves;
}

MaskedInstance sample(const Network& net, std::size_t y, Rng& rng) {
  const auto leaves = sample_assignment(net, y, rng);
  const std::size_t s = net.components().dim();
  MaskedInstance x(net.positions(), s);
  for (std::size_t i = 0; i < leaves.size(); ++i) {
    const auto patch = net.components().sample(leaves[i], rng);
    std::copy(patch.begin(), patch.end(), x.values.begin() + static_cast<std::ptrdiff_t>(i * s));
  }
  return x;
}

std::pair<std::size_t, std::size_t> receptive_field(const Network& net, const NeuronRef& neuron) {
  check_neuron(net, neuron);
  if (neuron.layer == 0) return {1, 1};
  const Topology& t = net.topology();
  const std::size_t k = weight_level(neuron);
  return {t.grid_height / t.level_height(k), t.grid_width / t.level_width(k)};
}

std::vector<std::size_t> greedy_assignment(const Network& net, const NeuronRef& neuron) {
  check_neuron(net, neuron);
  if (neuron.layer == 0) return {neuron.channel};
  const Topology& t = net.topology();
  const std::size_t k = weight_level(neuron);
  std::vector<std::size_t> leaves(t.positions(), 0);
  auto choose = [](std::span<const double> w) { return greedy_choice(w); };
  descend(net, k, neuron.position, neuron.channel, choose, leaves);

  const auto [fh, fw] = receptive_field(net, neuron);
  const std::size_t r0 = (neuron.position / t.level_width(k)) * fh;
  const std::size_t c0 = (neuron.position % t.level_width(k)) * fw;
  std::vector<std::size_t> field(fh * fw);
  for (std::size_t r = 0; r < fh; ++r)
    for (std::size_t c = 0; c < fw; ++c) field[r * fw + c] = leaves[(r0 + r) * t.grid_width + c0 + c];
  return field;
}

Image visualize_neuron(const Network& net, const NeuronRef& neuron) {
  const auto field = greedy_assignment(net, neuron);
  const auto [fh, fw] = receptive_field(net, neuron);
  const PatchShape patch = net.patch_shape();
  MaskedInstance x(fh * fw, patch.size());
  for (std::size_t i = 0; i < field.size(); ++i) {
    const auto mode = net.components().mode(field[i]);
    std::copy(mode.begin(), mode.end(), x.values.begin() + static_cast<std::ptrdiff_t>(i * patch.size()));
  }
  return instance_image(x, fh, fw, patch);
}

Image instance_image(const MaskedInstance& x, std::size_t grid_height, std::size_t grid_width, PatchShape patch) {
  if (grid_height * grid_width != x.positions || patch.size() != x.dim) {
    throw ShapeError("instance does not match the image geometry");
  }
  Image img(grid_height * patch.height, grid_width * patch.width);
  for (std::size_t i = 0; i < x.positions; ++i) {
    const std::size_t pr = i / grid_width, pc = i % grid_width;
    for (std::size_t a = 0; a < patch.height; ++a)
      for (std::size_t b = 0; b < patch.width; ++b)
        img(pr * patch.height + a, pc * patch.width + b) = x.values[i * x.dim + a * patch.width + b];
  }
  return img;
}

void write_samples_csv(std::ostream& out, std::span<const MaskedInstance> samples, std::span<const std::size_t> labels) {
  if (samples.size() != labels.size()) throw ShapeError("sample and label counts differ");
  out << "# tmmkit-csv v1\n";
  out << "id,label";
  const std::size_t n = samples.empty() ? 0 : samples.front().values.size();
  for (std::size_t k = 0; k < n; ++k) out << ",x" << k;
  out << '\n';
  const auto old = out.precision(17);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out << i << ',' << labels[i];
    for (double v : samples[i].values) out << ',' << v;
    out << '\n';
  }
  out.precision(old);
}

}  // namespace tmm
