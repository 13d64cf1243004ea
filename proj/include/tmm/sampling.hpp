#pragma once

#include <cstddef>
#include <iosfwd>
#include <span>
#include <vector>

#include "tmm/image.hpp"
#include "tmm/instance.hpp"
#include "tmm/network.hpp"
#include "tmm/rng.hpp"

namespace tmm {

/// Ancestral draw from the latent tree of class y: the top channel from the
/// class vector, each child's channel from its parent's weight vector, and
/// finally every patch from its drawn component.
MaskedInstance sample(const Network& net, std::size_t y, Rng& rng);

/// Component index drawn for every patch, without drawing the patches.
std::vector<std::size_t> sample_assignment(const Network& net, std::size_t y, Rng& rng);

/// Identifies a neuron. Layer 0 is the representation (channel = component),
/// layer l in [1, depth] is the weighted sum of hidden level l-1, and layer
/// depth+1 is the class output (position 0, channel = class).
struct NeuronRef {
  std::size_t layer = 0;
  std::size_t position = 0;
  std::size_t channel = 0;
};

/// Component chosen for every patch inside the receptive field of `neuron`,
/// row-major over the field, by greedy descent: each node takes the child
/// channel with the largest weight (lowest index on ties).
std::vector<std::size_t> greedy_assignment(const Network& net, const NeuronRef& neuron);

/// Receptive-field extent of a neuron in patches (rows, columns).
std::pair<std::size_t, std::size_t> receptive_field(const Network& net, const NeuronRef& neuron);

/// Image of the greedy assignment: each patch shows its component's mode.
Image visualize_neuron(const Network& net, const NeuronRef& neuron);

/// Arranges an instance's patches into an image on a grid_height x grid_width patch grid.
Image instance_image(const MaskedInstance& x, std::size_t grid_height, std::size_t grid_width, PatchShape patch);

/// One row per sample: id, label, then every coordinate.
void write_samples_csv(std::ostream& out, std::span<const MaskedInstance> samples, std::span<const std::size_t> labels);

}  // namespace tmm
