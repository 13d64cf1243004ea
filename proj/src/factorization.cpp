#include "tmm/factorization.hpp"

#include <cmath>
#include <string>

#include "tmm/errors.hpp"
#include "tmm/logspace.hpp"

namespace tmm {

std::size_t Topology::level_height(std::size_t l) const {
  std::size_t h = grid_height;
  for (std::size_t k = 0; k < l; ++k) h /= levels[k].pool.height;
  return h;
}

std::size_t Topology::level_width(std::size_t l) const {
  std::size_t w = grid_width;
  for (std::size_t k = 0; k < l; ++k) w /= levels[k].pool.width;
  return w;
}

std::size_t Topology::slots(std::size_t l) const {
  switch (levels[l].sharing) {
    case Sharing::unshared:
      return level_positions(l);
    case Sharing::shared:
      return 1;
    case Sharing::window:
      return levels[l].pool.size();
  }
  return 0;
}

std::size_t Topology::slot(std::size_t l, std::size_t j) const {
  switch (levels[l].sharing) {
    case Sharing::unshared:
      return j;
    case Sharing::shared:
      return 0;
    case Sharing::window: {
      const std::size_t w = level_width(l);
      const PoolWindow& pool = levels[l].pool;
      return (j / w % pool.height) * pool.width + (j % w % pool.width);
    }
  }
  return 0;
}

std::vector<std::size_t> Topology::children(std::size_t l, std::size_t p) const {
  const PoolWindow& pool = levels[l].pool;
  const std::size_t parent_w = level_width(l + 1);
  const std::size_t r = p / parent_w;
  const std::size_t c = p % parent_w;
  const std::size_t w = level_width(l);
  std::vector<std::size_t> out;
  out.reserve(pool.size());
  for (std::size_t a = 0; a < pool.height; ++a)
    for (std::size_t b = 0; b < pool.width; ++b) out.push_back((r * pool.height + a) * w + c * pool.width + b);
  return out;
}

void Topology::validate() const {
  if (levels.empty()) throw ShapeError("topology needs at least one level");
  if (grid_height == 0 || grid_width == 0) throw ShapeError("empty patch grid");
  if (classes == 0) throw ShapeError("topology needs at least one class");
  std::size_t h = grid_height;
  std::size_t w = grid_width;
  for (std::size_t l = 0; l < levels.size(); ++l) {
    const LevelSpec& spec = levels[l];
    if (spec.width == 0) throw ShapeError("level " + std::to_string(l) + " has zero width");
    if (spec.pool.height == 0 || spec.pool.width == 0 || h % spec.pool.height != 0 || w % spec.pool.width != 0) {
      throw ShapeError("level " + std::to_string(l) + " pooling window " + std::to_string(spec.pool.height) + "x" +
                       std::to_string(spec.pool.width) + " does not tile a " + std::to_string(h) + "x" +
                       std::to_string(w) + " grid");
    }
    h /= spec.pool.height;
    w /= spec.pool.width;
  }
  if (h != 1 || w != 1) {
    throw ShapeError("pooling leaves a " + std::to_string(h) + "x" + std::to_string(w) +
                     " grid; pad the input to a multiple of the pooling extents");
  }
}

Topology sequence_topology(std::size_t arity, std::vector<std::size_t> ranks, std::size_t classes, Sharing sharing) {
  Topology t;
  t.grid_height = 1;
  t.grid_width = 1;
  for (std::size_t r : ranks) {
    t.levels.push_back(LevelSpec{r, sharing, PoolWindow{1, arity}});
    t.grid_width *= arity;
  }
  t.classes = classes;
  t.validate();
  return t;
}

Topology cp_topology(std::size_t grid_height, std::size_t grid_width, std::size_t rank, std::size_t classes,
                     bool shared) {
  Topology t;
  t.grid_height = grid_height;
  t.grid_width = grid_width;
  t.levels.push_back(
      LevelSpec{rank, shared ? Sharing::shared : Sharing::unshared, PoolWindow{grid_height, grid_width}});
  t.classes = classes;
  t.validate();
  return t;
}

HTParams HTParams::uniform(const Topology& topology, std::size_t components) {
  topology.validate();
  if (components == 0) throw ShapeError("need at least one mixture component");
  HTParams p;
  p.topology = topology;
  p.components = components;
  std::size_t in = components;
  for (std::size_t l = 0; l < topology.depth(); ++l) {
    p.levels.emplace_back(topology.slots(l), topology.levels[l].width, in);
    in = topology.levels[l].width;
  }
  p.top = LevelWeights(1, topology.classes, in);
  for (LevelWeights* b : p.blocks()) {
    for (double& v : b->log_w) v = -std::log(static_cast<double>(b->in));
  }
  return p;
}

HTParams HTParams::random(const Topology& topology, std::size_t components, Rng& rng) {
  HTParams p = uniform(topology, components);
  for (LevelWeights* b : p.blocks()) {
    for (double& v : b->log_w) v = rng.normal();
  }
  p.normalize();
  return p;
}

std::vector<LevelWeights*> HTParams::blocks() {
  std::vector<LevelWeights*> out;
  for (auto& l : levels) out.push_back(&l);
  out.push_back(&top);
  return out;
}

std::vector<const LevelWeights*> HTParams::blocks() const {
  std::vector<const LevelWeights*> out;
  for (const auto& l : levels) out.push_back(&l);
  out.push_back(&top);
  return out;
}

void HTParams::normalize() {
  for (LevelWeights* b : blocks()) normalize_groups(b->log_w, b->in);
}

double HTParams::normalization_error() const {
  double worst = 0.0;
  for (const LevelWeights* b : blocks()) {
    for (std::size_t off = 0; off < b->log_w.size(); off += b->in) {
      const double z = logsumexp(std::span<const double>(b->log_w.data() + off, b->in));
      worst = std::max(worst, std::isfinite(z) ? std::abs(z) : kInf);
    }
  }
  return worst;
}

CPParams CPParams::random(std::size_t positions, std::size_t components, std::size_t rank, std::size_t classes,
                          bool shared, Rng& rng) {
  if (positions == 0 || components == 0 || rank == 0 || classes == 0) throw ShapeError("empty CP parameters");
  CPParams p;
  p.positions = positions;
  p.components = components;
  p.rank = rank;
  p.classes = classes;
  p.shared = shared;
  p.log_top.resize(classes * rank);
  p.log_factors.resize((shared ? 1 : positions) * rank * components);
  for (double& v : p.log_top) v = rng.normal();
  for (double& v : p.log_factors) v = rng.normal();
  normalize_groups(p.log_top, rank);
  normalize_groups(p.log_factors, components);
  return p;
}

HTParams to_ht(const CPParams& cp, std::size_t grid_height, std::size_t grid_width) {
  if (grid_height * grid_width != cp.positions) throw ShapeError("grid does not hold the CP positions");
  HTParams p = HTParams::uniform(cp_topology(grid_height, grid_width, cp.rank, cp.classes, cp.shared), cp.components);
  LevelWeights& level = p.levels[0];
  for (std::size_t slot = 0; slot < level.slots; ++slot)
    for (std::size_t z = 0; z < cp.rank; ++z) {
      const auto src = cp.factor(z, slot);
      std::copy(src.begin(), src.end(), level.vec(slot, z).begin());
    }
  for (std::size_t y = 0; y < cp.classes; ++y) {
    const auto src = cp.top(y);
    std::copy(src.begin(), src.end(), p.top.vec(0, y).begin());
  }
  return p;
}

HTParams to_ht(const CPParams& cp) { return to_ht(cp, 1, cp.positions); }

namespace {

DenseTensor exp_vector(std::span<const double> log_values) {
  std::vector<double> v(log_values.size());
  for (std::size_t k = 0; k < v.size(); ++k) v[k] = std::exp(log_values[k]);
  return DenseTensor::vector(std::move(v));
}

void axpy(double a, const DenseTensor& x, DenseTensor& y) {
  auto dst = y.entries();
  const auto src = x.entries();
  for (std::size_t k = 0; k < dst.size(); ++k) dst[k] += a * src[k];
}

}  // namespace

DenseTensor expand_cp(const CPParams& p, std::size_t y, std::size_t budget) {
  if (y >= p.classes) throw ShapeError("class index out of range");
  std::vector<std::size_t> dims(p.positions, p.components);
  DenseTensor out(dims, budget);
  for (std::size_t z = 0; z < p.rank; ++z) {
    DenseTensor term = exp_vector(p.factor(z, 0));
    for (std::size_t i = 1; i < p.positions; ++i) term = tensor_product(term, exp_vector(p.factor(z, i)), budget);
    axpy(std::exp(p.top(y)[z]), term, out);
  }
  return out;
}

DenseTensor expand_ht(const HTParams& p, std::size_t y, std::size_t budget) {
  const Topology& t = p.topology;
  if (y >= t.classes) throw ShapeError("class index out of range");
  std::vector<std::size_t> dims(t.positions(), p.components);
  checked_element_count(dims, budget);

  // Node tensors of the current level: [position][channel], modes in tree order,
  // with the patch index behind each mode kept in `leaves`.
  struct Node {
    std::vector<DenseTensor> channels;
    std::vector<std::size_t> leaves;
  };

  // Inputs to level 0 are the one-hot indicator vectors e_d of each patch.
  std::vector<Node> below(t.positions());
  for (std::size_t j = 0; j < t.positions(); ++j) {
    below[j].leaves = {j};
    for (std::size_t d = 0; d < p.components; ++d) {
      std::vector<double> e(p.components, 0.0);
      e[d] = 1.0;
      below[j].channels.push_back(DenseTensor::vector(std::move(e)));
    }
  }

  for (std::size_t l = 0; l < t.depth(); ++l) {
    const LevelWeights& w = p.levels[l];
    // Weighted sums at every position of level l.
    for (std::size_t j = 0; j < t.level_positions(l); ++j) {
      Node& node = below[j];
      std::vector<DenseTensor> mixed;
      for (std::size_t gamma = 0; gamma < w.out; ++gamma) {
        DenseTensor acc(node.channels.front().dims(), budget);
        const auto a = w.vec(t.slot(l, j), gamma);
        for (std::size_t alpha = 0; alpha < w.in; ++alpha) axpy(std::exp(a[alpha]), node.channels[alpha], acc);
        mixed.push_back(std::move(acc));
      }
      node.channels = std::move(mixed);
    }
    // Product pooling: tensor product of the children, channel by channel.
    std::vector<Node> above(t.level_positions(l + 1));
    for (std::size_t q = 0; q < above.size(); ++q) {
      const auto kids = t.children(l, q);
      for (std::size_t gamma = 0; gamma < w.out; ++gamma) {
        DenseTensor prod = below[kids[0]].channels[gamma];
        for (std::size_t k = 1; k < kids.size(); ++k) prod = tensor_product(prod, below[kids[k]].channels[gamma], budget);
        above[q].channels.push_back(std::move(prod));
      }
      for (std::size_t kid : kids) above[q].leaves.insert(above[q].leaves.end(), below[kid].leaves.begin(), below[kid].leaves.end());
    }
    below = std::move(above);
  }

  const Node& root = below.front();
  DenseTensor tree_order(root.channels.front().dims(), budget);
  const auto a = p.top.vec(0, y);
  for (std::size_t alpha = 0; alpha < p.top.in; ++alpha) axpy(std::exp(a[alpha]), root.channels[alpha], tree_order);

  std::vector<std::size_t> perm(root.leaves.size());
  for (std::size_t k = 0; k < root.leaves.size(); ++k) perm[root.leaves[k]] = k;
  return permute_modes(tree_order, perm);
}

DenseTensor gmm_sparse_prior(std::span<const double> weights, std::size_t positions, std::size_t budget) {
  const std::size_t k_count = weights.size();
  if (k_count == 0 || positions == 0) throw ShapeError("empty sparse prior");
  const std::size_t m = positions * k_count;
  DenseTensor out(std::vector<std::size_t>(positions, m), budget);
  std::vector<std::size_t> idx(positions);
  for (std::size_t k = 0; k < k_count; ++k) {
    for (std::size_t i = 0; i < positions; ++i) idx[i] = positions * k + i;
    out.at(idx) = weights[k];
  }
  return out;
}

CPParams gmm_cp_params(std::span<const double> weights, std::size_t positions) {
  const std::size_t k_count = weights.size();
  CPParams p;
  p.positions = positions;
  p.components = positions * k_count;
  p.rank = k_count;
  p.classes = 1;
  p.shared = false;
  p.log_top.resize(k_count);
  for (std::size_t k = 0; k < k_count; ++k) p.log_top[k] = std::log(weights[k]);
  p.log_factors.assign(positions * k_count * p.components, -kInf);
  for (std::size_t i = 0; i < positions; ++i)
    for (std::size_t k = 0; k < k_count; ++k) p.log_factors[(i * k_count + k) * p.components + positions * k + i] = 0.0;
  return p;
}

std::vector<double> normalize_to_simplex(std::span<const double> log_weights) {
  std::vector<double> out(log_weights.begin(), log_weights.end());
  normalize_groups(out, out.size());
  return out;
}

void normalize_groups(std::span<double> log_weights, std::size_t group) {
  if (group == 0 || log_weights.size() % group != 0) throw ShapeError("weights do not split into groups");
  for (std::size_t off = 0; off < log_weights.size(); off += group) {
    auto v = log_weights.subspan(off, group);
    const double z = logsumexp(v);
    if (!std::isfinite(z)) throw Error("cannot normalize a weight vector without finite entries");
    for (double& x : v) x -= z;
  }
}

}  // namespace tmm
