#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <sstream>

#include "tmm/data_io.hpp"
#include "tmm/errors.hpp"
#include "tmm/oracle.hpp"
#include "tmm/serialize.hpp"
#include "toy_models.hpp"

using namespace tmm;

namespace {

std::string bytes(std::initializer_list<int> v) {
  std::string s;
  for (int b : v) s.push_back(static_cast<char>(b));
  return s;
}

Image ramp(std::size_t h, std::size_t w) {
  Image img(h, w);
  for (std::size_t k = 0; k < img.pixels.size(); ++k) img.pixels[k] = static_cast<double>(k);
  return img;
}

PatchLayout layout(std::size_t h, std::size_t w, PatchShape p, std::size_t gh, std::size_t gw) {
  PatchLayout l;
  l.image_height = h;
  l.image_width = w;
  l.patch = p;
  l.grid_height = gh;
  l.grid_width = gw;
  return l;
}

}  // namespace

TEST(Idx, SinglePixel) {
  std::istringstream in(bytes({0, 0, 8, 3, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 255}));
  const IdxArray a = read_idx(in);
  EXPECT_EQ(a.dims, (std::vector<std::uint32_t>{1, 1, 1}));
  ASSERT_EQ(a.scaled().size(), 1u);
  EXPECT_EQ(a.scaled()[0], 1.0);
}

TEST(Idx, WrongMagic) {
  std::istringstream in(bytes({1, 0, 8, 1, 0, 0, 0, 1, 7}));
  EXPECT_THROW(read_idx(in), ParseError);
  std::istringstream dtype(bytes({0, 0, 0x0D, 1, 0, 0, 0, 1, 7, 7, 7, 7}));
  EXPECT_THROW(read_idx(dtype), ParseError);
}

TEST(Idx, Truncated) {
  std::istringstream in(bytes({0, 0, 8, 2, 0, 0, 0, 2, 0, 0, 0, 2, 1, 2, 3}));
  EXPECT_THROW(read_idx(in), ParseError);
}

TEST(Idx, RoundTripBitExact) {
  IdxArray a;
  a.dims = {1, 2, 3};
  a.data = {0, 17, 128, 200, 254, 255};
  std::ostringstream out;
  write_idx(out, a);
  const std::string s = out.str();
  EXPECT_EQ(s.substr(0, 4), bytes({0, 0, 8, 3}));
  std::istringstream in(s);
  EXPECT_EQ(read_idx(in), a);

  const auto path = std::filesystem::temp_directory_path() / "tmm_idx_roundtrip.idx";
  write_idx(path, a);
  EXPECT_EQ(load_idx(path), a);
  const auto images = load_idx_images(path);
  ASSERT_EQ(images.size(), 1u);
  EXPECT_EQ(images[0].height, 2u);
  EXPECT_EQ(images[0].width, 3u);
  EXPECT_EQ(images[0].pixels[2], 128.0 / 255.0);
  std::filesystem::remove(path);
}

TEST(Idx, BundledSubsetLoads) {
  const auto images = load_idx_images(TMM_DATA_DIR "/mnist5k-images-idx3-ubyte");
  const auto labels = load_idx_labels(TMM_DATA_DIR "/mnist5k-labels-idx1-ubyte");
  ASSERT_EQ(images.size(), 5000u);
  ASSERT_EQ(labels.size(), 5000u);
  EXPECT_EQ(images[0].height, 28u);
  std::vector<std::size_t> per_digit(10, 0);
  for (auto y : labels) ++per_digit.at(y);
  for (auto c : per_digit) EXPECT_EQ(c, 500u);
}

TEST(Patchify, SinglePatch) {
  const MaskedInstance x = patchify(ramp(2, 2), layout(2, 2, {2, 2}, 1, 1));
  EXPECT_EQ(x.positions, 1u);
  EXPECT_EQ(x.dim, 4u);
  EXPECT_EQ(x.values, (std::vector<double>{0, 1, 2, 3}));
}

TEST(Patchify, QuadrantsRowMajor) {
  const MaskedInstance x = patchify(ramp(4, 4), layout(4, 4, {2, 2}, 2, 2));
  ASSERT_EQ(x.positions, 4u);
  EXPECT_EQ(std::vector<double>(x.patch(0).begin(), x.patch(0).end()), (std::vector<double>{0, 1, 4, 5}));
  EXPECT_EQ(std::vector<double>(x.patch(1).begin(), x.patch(1).end()), (std::vector<double>{2, 3, 6, 7}));
  EXPECT_EQ(std::vector<double>(x.patch(2).begin(), x.patch(2).end()), (std::vector<double>{8, 9, 12, 13}));
  EXPECT_EQ(std::vector<double>(x.patch(3).begin(), x.patch(3).end()), (std::vector<double>{10, 11, 14, 15}));
}

TEST(Patchify, MnistGeometry) {
  const PatchLayout l = PatchLayout::covering(28, 28, {2, 2});
  EXPECT_EQ(l.positions(), 196u);
  const MaskedInstance x = patchify(ramp(28, 28), l);
  EXPECT_EQ(x.positions, 196u);
  EXPECT_EQ(x.dim, 4u);
  const PatchLayout padded = PatchLayout::covering(28, 28, {2, 2}, 16);
  EXPECT_EQ(padded.grid_height, 16u);
  EXPECT_EQ(padded.padded_height(), 32u);
}

TEST(Patchify, UnpatchifyInverts) {
  const PatchLayout l = layout(6, 4, {3, 2}, 2, 2);
  const Image img = ramp(6, 4);
  std::vector<std::uint8_t> obs(24, 1);
  obs[5] = obs[17] = 0;
  const auto [back, flags] = unpatchify(patchify(img, l, obs), l);
  EXPECT_EQ(flags, obs);
  for (std::size_t k = 0; k < 24; ++k)
    if (obs[k]) EXPECT_EQ(back.pixels[k], img.pixels[k]);
  const auto [full, all] = unpatchify(patchify(img, l), l);
  EXPECT_EQ(full.pixels, img.pixels);
}

TEST(Patchify, PaddingIsMissing) {
  const PatchLayout l = layout(3, 3, {2, 2}, 2, 2);
  const MaskedInstance x = patchify(ramp(3, 3), l);
  std::size_t padded = 0;
  for (std::size_t k = 0; k < x.observed.size(); ++k) padded += x.observed[k] == 0;
  EXPECT_EQ(padded, 16u - 9u);
  MaskedInstance y = MaskedInstance::complete(4, 4, std::vector<double>(16, 1.0));
  mark_padding_missing(y, l);
  EXPECT_EQ(y.observed, x.observed);
}

TEST(Patchify, PaddingNeverChangesLikelihood) {
  // 2x5 image on a 1x8 strip of 2x1 patches; the last three positions are padding.
  Rng rng(1);
  oracle::RandomNetSpec spec;
  spec.family = oracle::Family::gaussian;
  spec.dim = 2;
  spec.grid_width = 8;
  const Network net8 = oracle::random_network(spec, rng);
  Image img(2, 5);
  for (double& v : img.pixels) v = rng.normal();
  const PatchLayout l = layout(2, 5, {2, 1}, 1, 8);
  const MaskedInstance padded = patchify(img, l);
  MaskedInstance cropped = padded;
  for (std::size_t k = 0; k < cropped.values.size(); ++k)
    if (!cropped.observed[k]) cropped.values[k] = 1e6;
  const auto a = net8.forward(padded), b = net8.forward(cropped);
  for (std::size_t y = 0; y < a.size(); ++y) EXPECT_NEAR(a[y], b[y], 1e-12);
  for (std::size_t y = 0; y < a.size(); ++y)
    EXPECT_LE(oracle::log_rel_error(a[y], oracle::dense_log_likelihood(net8, padded, y)), 1e-12);
}

TEST(SynthDataset, SingleClass) {
  const Network net = toy::class_per_term_network({{{0.5, 0.5}, {0.2, 0.8}}});
  Rng rng(2);
  const Dataset d = synth_dataset({&net, ClassPrior::uniform(1), 50}, rng);
  ASSERT_EQ(d.size(), 50u);
  for (auto y : d.labels) EXPECT_EQ(y, 0u);
}

TEST(SynthDataset, DeterministicModel) {
  const Network net = toy::class_per_term_network({{{0, 1}, {1, 0}}});
  Rng rng(3);
  const Dataset d = synth_dataset({&net, ClassPrior::uniform(1), 20}, rng);
  for (const auto& x : d.instances) EXPECT_EQ(x.values, (std::vector<double>{1, 0}));
}

TEST(SynthDataset, ClassFrequenciesFollowPrior) {
  const Network net = toy::class_per_term_network({{{0.5, 0.5}}, {{0.5, 0.5}}, {{0.5, 0.5}}});
  const std::vector<double> prior{0.2, 0.3, 0.5};
  Rng rng(4);
  const std::size_t n = 20000;
  const Dataset d = synth_dataset({&net, ClassPrior::from_probs(prior), n}, rng);
  std::vector<double> count(3, 0.0);
  for (auto y : d.labels) count[y] += 1.0;
  for (std::size_t y = 0; y < 3; ++y)
    EXPECT_LE(std::abs(count[y] - n * prior[y]), 3.0 * std::sqrt(n * prior[y] * (1 - prior[y])));
}

TEST(LabelsCsv, Format) {
  std::ostringstream out;
  const std::vector<std::size_t> labels{2, 0};
  write_labels_csv(out, labels);
  EXPECT_EQ(out.str(), "# tmmkit-csv v1\nid,label\n0,2\n1,0\n");
}

TEST(Serialize, RoundTripPreservesEverything) {
  Rng rng(5);
  for (bool deep : {true, false}) {
    for (auto family : {oracle::Family::gaussian, oracle::Family::categorical}) {
      oracle::RandomNetSpec spec;
      spec.deep = deep;
      spec.family = family;
      spec.grid_height = 2;
      spec.grid_width = 4;
      spec.dim = 2;
      spec.alphabet = 3;
      spec.sharing = deep ? Sharing::window : Sharing::shared;
      const Network base = oracle::random_network(spec, rng);
      const Network net(base.components(), base.params(), PatchShape{1, 2});
      std::stringstream buf;
      save_network(buf, net);
      const std::string first = buf.str();
      EXPECT_EQ(first.substr(0, 4), "TMM1");
      const Network back = load_network(buf);
      EXPECT_TRUE(back == net);
      std::ostringstream again;
      save_network(again, back);
      EXPECT_EQ(again.str(), first);
    }
  }
}

TEST(Serialize, RejectsCorruptInput) {
  Rng rng(6);
  const Network net = oracle::random_network(oracle::RandomNetSpec{}, rng);
  std::ostringstream out;
  save_network(out, net);
  std::string s = out.str();
  std::istringstream truncated(s.substr(0, s.size() - 3));
  EXPECT_THROW(load_network(truncated), ParseError);
  s[0] = 'X';
  std::istringstream magic(s);
  EXPECT_THROW(load_network(magic), ParseError);
}

TEST(Serialize, JsonDescribesArchitecture) {
  Rng rng(7);
  const Network net = oracle::random_network(oracle::RandomNetSpec{}, rng);
  const std::string j = network_json(net);
  EXPECT_NE(j.find("\"levels\""), std::string::npos);
  EXPECT_NE(j.find("\"components\""), std::string::npos);
}
