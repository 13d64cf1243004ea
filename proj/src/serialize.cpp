#include "tmm/serialize.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>

#include "json.hpp"
#include "tmm/errors.hpp"

namespace tmm {

namespace {

constexpr char kMagic[4] = {'T', 'M', 'M', '1'};
constexpr std::uint32_t kVersion = 1;
constexpr std::uint64_t kMaxCount = std::uint64_t{1} << 32;

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u64(std::uint64_t v) {
    char b[8];
    for (int k = 0; k < 8; ++k) b[k] = static_cast<char>((v >> (8 * k)) & 0xff);
    out_.write(b, 8);
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void doubles(std::span<const double> v) {
    for (double x : v) f64(x);
  }

 private:
  std::ostream& out_;
};

class Reader {
 public:
  explicit Reader(std::istream& in) : in_(in) {}

  std::uint64_t u64() {
    unsigned char b[8];
    if (!in_.read(reinterpret_cast<char*>(b), 8)) throw ParseError("network file is truncated");
    std::uint64_t v = 0;
    for (int k = 0; k < 8; ++k) v |= std::uint64_t{b[k]} << (8 * k);
    return v;
  }
  std::size_t count() {
    const std::uint64_t v = u64();
    if (v > kMaxCount) throw ParseError("network file declares an implausible size");
    return static_cast<std::size_t>(v);
  }
  double f64() { return std::bit_cast<double>(u64()); }
  void doubles(std::span<double> v) {
    for (double& x : v) x = f64();
  }

 private:
  std::istream& in_;
};

const char* sharing_name(Sharing s) {
  switch (s) {
    case Sharing::unshared:
      return "unshared";
    case Sharing::shared:
      return "shared";
    case Sharing::window:
      return "window";
  }
  return "?";
}

}  // namespace

void save_network(std::ostream& out, const Network& net) {
  out.write(kMagic, 4);
  Writer w(out);
  w.u64(kVersion);
  w.u64(net.is_shallow() ? 0 : 1);
  const ComponentFamily& f = net.components();
  w.u64(f.kind() == ComponentKind::diagonal_gaussian ? 0 : 1);
  w.u64(f.count());
  w.u64(f.dim());
  w.u64(f.alphabet());
  w.u64(net.patch_shape().height);
  w.u64(net.patch_shape().width);
  const Topology& t = net.topology();
  w.u64(t.grid_height);
  w.u64(t.grid_width);
  w.u64(t.classes);
  w.u64(t.depth());
  for (const LevelSpec& l : t.levels) {
    w.u64(l.width);
    w.u64(static_cast<std::uint64_t>(l.sharing));
    w.u64(l.pool.height);
    w.u64(l.pool.width);
  }
  for (const auto& block : f.parameter_blocks()) w.doubles(block);
  for (const LevelWeights* b : net.params().blocks()) w.doubles(b->log_w);
  if (!out) throw Error("failed to write network");
}

void save_network(const std::filesystem::path& path, const Network& net) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path.string());
  save_network(out, net);
}

Network load_network(std::istream& in) {
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0) throw ParseError("not a TMM1 network file");
  Reader r(in);
  if (r.u64() != kVersion) throw ParseError("unsupported network file version");
  const std::uint64_t kind = r.u64();
  if (kind > 1) throw ParseError("unknown network kind");
  const std::uint64_t family_kind = r.u64();
  const std::size_t m = r.count(), s = r.count(), v = r.count();
  PatchShape patch{r.count(), r.count()};
  ComponentFamily family;
  if (family_kind == 0) {
    family = ComponentFamily::gaussian(m, s);
  } else if (family_kind == 1) {
    family = ComponentFamily::categorical(m, s, v);
  } else {
    throw ParseError("unknown component family");
  }
  Topology t;
  t.grid_height = r.count();
  t.grid_width = r.count();
  t.classes = r.count();
  const std::size_t depth = r.count();
  if (depth > 64) throw ParseError("network file declares an implausible depth");
  for (std::size_t l = 0; l < depth; ++l) {
    LevelSpec spec;
    spec.width = r.count();
    const std::uint64_t sharing = r.u64();
    if (sharing > 2) throw ParseError("unknown sharing mode");
    spec.sharing = static_cast<Sharing>(sharing);
    spec.pool.height = r.count();
    spec.pool.width = r.count();
    t.levels.push_back(spec);
  }
  try {
    t.validate();
  } catch (const ShapeError& e) {
    throw ParseError(std::string("invalid topology: ") + e.what());
  }
  if ((kind == 0) != (depth == 1)) throw ParseError("network kind disagrees with its depth");
  for (auto block : family.parameter_blocks()) r.doubles(block);
  HTParams params = HTParams::uniform(t, m);
  for (LevelWeights* b : params.blocks()) r.doubles(b->log_w);
  return Network(std::move(family), std::move(params), patch);
}

Network load_network(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return load_network(in);
}

std::string network_json(const Network& net) {
  using nlohmann::json;
  const ComponentFamily& f = net.components();
  const Topology& t = net.topology();
  json j;
  j["format"] = "TMM1";
  j["kind"] = net.is_shallow() ? "cp" : "ht";
  j["components"] = {{"family", f.kind() == ComponentKind::diagonal_gaussian ? "gaussian" : "categorical"},
                     {"count", f.count()},
                     {"dim", f.dim()},
                     {"alphabet", f.alphabet()}};
  j["patch"] = {net.patch_shape().height, net.patch_shape().width};
  j["grid"] = {t.grid_height, t.grid_width};
  j["classes"] = t.classes;
  json levels = json::array();
  for (const LevelSpec& l : t.levels) {
    levels.push_back({{"width", l.width}, {"sharing", sharing_name(l.sharing)}, {"pool", {l.pool.height, l.pool.width}}});
  }
  j["levels"] = levels;
  json blocks = json::array();
  for (const auto& b : f.parameter_blocks()) blocks.push_back(std::vector<double>(b.begin(), b.end()));
  j["component_parameters"] = blocks;
  json weights = json::array();
  for (const LevelWeights* b : net.params().blocks()) {
    weights.push_back({{"slots", b->slots}, {"out", b->out}, {"in", b->in}, {"log_w", b->log_w}});
  }
  j["weights"] = weights;
  return j.dump(2);
}

}  // namespace tmm
