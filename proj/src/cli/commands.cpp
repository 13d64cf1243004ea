#include "tmm/cli/commands.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "tmm/errors.hpp"
#include "tmm/inference.hpp"
#include "tmm/parallel.hpp"
#include "tmm/sampling.hpp"
#include "tmm/serialize.hpp"

namespace tmm::cli {

namespace {

constexpr std::uint64_t kDataStream = 101;
constexpr std::uint64_t kInitStream = 102;
constexpr std::uint64_t kEvalStream = 103;
constexpr std::uint64_t kDeletionStream = 104;
constexpr std::uint64_t kRepeatStream = 105;
constexpr std::size_t kNeighbours = 5;

std::uint64_t run_seed(const ExperimentConfig& cfg, const CommonOptions& options) {
  return options.seed.value_or(cfg.train.seed);
}

std::ofstream open_output(const CommonOptions& options, const std::string& name, bool binary = false) {
  std::filesystem::create_directories(options.out_dir);
  const auto path = options.out_dir / name;
  std::ofstream out(path, binary ? std::ios::binary : std::ios::out);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

std::string fixed(double v) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(6) << v;
  return s.str();
}

void check_compatible(const Network& net, const ExperimentData& data) {
  if (net.positions() != data.layout.positions() || net.patch_shape() != data.layout.patch ||
      net.topology().grid_width != data.layout.grid_width) {
    throw Error("checkpoint geometry does not match the configured data layout");
  }
  if (net.classes() != data.classes) throw Error("checkpoint class count does not match the configured digits");
}

std::vector<std::size_t> knn_batch(const Dataset& train, const std::vector<MaskedInstance>& xs, std::size_t threads) {
  std::vector<std::size_t> out(xs.size());
  parallel_for(xs.size(), threads, [&](std::size_t i) { out[i] = knn_predict(train, xs[i], kNeighbours); });
  return out;
}

TrainResult train_model(ExperimentConfig cfg, const ExperimentData& data, std::uint64_t seed, std::size_t threads,
                        const IterationCallback& callback = {}) {
  cfg.train.seed = seed;
  cfg.train.threads = threads;
  TrainResult r{build_network(cfg, data, seed), {}, 0.0, 0.0};
  r.trace = train(r.net, data.train, cfg.train, callback);
  const ClassPrior prior = ClassPrior::uniform(data.classes);
  const BatchOptions batch{threads, {}};
  r.train_accuracy = accuracy(batch_predict(r.net, data.train.instances, prior, batch), data.train.labels);
  r.test_accuracy = accuracy(batch_predict(r.net, data.test.instances, prior, batch), data.test.labels);
  return r;
}

}  // namespace

PatchLayout layout_for(const ModelConfig& model, std::size_t height, std::size_t width) {
  std::size_t gh = 1, gw = 1;
  for (const LevelSpec& l : model.levels) {
    gh *= l.pool.height;
    gw *= l.pool.width;
  }
  PatchLayout layout;
  layout.image_height = height;
  layout.image_width = width;
  layout.patch = model.patch;
  layout.grid_height = gh;
  layout.grid_width = gw;
  if (layout.padded_height() < height || layout.padded_width() < width) {
    throw ConfigError("model.levels: pooling covers " + std::to_string(layout.padded_height()) + "x" +
                      std::to_string(layout.padded_width()) + " pixels, image is " + std::to_string(height) + "x" +
                      std::to_string(width));
  }
  return layout;
}

ExperimentData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed) {
  const auto images = load_idx_images(cfg.data.images);
  const auto labels = load_idx_labels(cfg.data.labels);
  if (images.size() != labels.size()) throw Error("image and label files differ in length");
  if (images.empty()) throw Error("empty image file");
  std::vector<std::size_t> digits = cfg.data.digits;
  if (digits.empty()) {
    digits.resize(10);
    std::iota(digits.begin(), digits.end(), std::size_t{0});
  }
  ExperimentData d;
  d.classes = digits.size();
  d.layout = layout_for(cfg.model, images.front().height, images.front().width);
  const Rng root = Rng(seed).derive(kDataStream);
  for (std::size_t y = 0; y < digits.size(); ++y) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == digits[y]) idx.push_back(i);
    const std::size_t need = cfg.data.train_per_class + cfg.data.test_per_class;
    if (idx.size() < need) {
      throw Error("digit " + std::to_string(digits[y]) + " has " + std::to_string(idx.size()) + " images, " +
                  std::to_string(need) + " requested");
    }
    Rng rng = root.derive(digits[y]);
    for (std::size_t k = idx.size(); k > 1; --k) std::swap(idx[k - 1], idx[rng.uniform_int(k)]);
    for (std::size_t k = 0; k < need; ++k) {
      const bool is_train = k < cfg.data.train_per_class;
      const Image& img = images[idx[k]];
      (is_train ? d.train_images : d.test_images).push_back(img);
      Dataset& set = is_train ? d.train : d.test;
      set.instances.push_back(patchify(img, d.layout));
      set.labels.push_back(y);
    }
  }
  return d;
}

Network build_network(const ExperimentConfig& cfg, const ExperimentData& data, std::uint64_t seed) {
  Topology t;
  t.grid_height = data.layout.grid_height;
  t.grid_width = data.layout.grid_width;
  t.levels = cfg.model.levels;
  t.classes = data.classes;
  t.validate();
  Rng rng = Rng(seed).derive(kInitStream);
  ComponentFamily family = ComponentFamily::gaussian(cfg.model.components, cfg.model.patch.size());
  if (cfg.model.init == "data") {
    init_components_from_data(family, data.train, rng);
  } else {
    for (std::size_t d = 0; d < family.count(); ++d)
      for (std::size_t c = 0; c < family.dim(); ++c) family.set_mean(d, c, rng.normal());
  }
  HTParams params = HTParams::random(t, cfg.model.components, rng);
  return Network(std::move(family), std::move(params), cfg.model.patch);
}

TrainResult cmd_train(const std::filesystem::path& config, const CommonOptions& options) {
  const ExperimentConfig cfg = load_config(config);
  const ExperimentData data = prepare_data(cfg, cfg.train.seed);
  const std::uint64_t seed = run_seed(cfg, options);
  IterationCallback callback;
  if (cfg.checkpoint_every > 0) {
    callback = [&](std::size_t it, const Network& net) {
      if ((it + 1) % cfg.checkpoint_every != 0) return;
      auto out = open_output(options, "model-" + std::to_string(it + 1) + ".tmm", true);
      save_network(out, net);
    };
  }
  TrainResult r = train_model(cfg, data, seed, options.threads, callback);
  {
    auto out = open_output(options, "model.tmm", true);
    save_network(out, r.net);
  }
  {
    auto out = open_output(options, "loss.csv");
    write_loss_csv(out, r.trace);
  }
  {
    auto out = open_output(options, "train_summary.csv");
    out << "# tmmkit-csv v1\n";
    out << "iterations,train_accuracy,test_accuracy\n";
    out << r.trace.size() << ',' << fixed(r.train_accuracy) << ',' << fixed(r.test_accuracy) << '\n';
  }
  return r;
}

MaskKind parse_mask_kind(const std::string& name) {
  if (name == "iid") return MaskKind::iid;
  if (name == "rectangles") return MaskKind::rectangles;
  if (name == "feature_deletion") return MaskKind::feature_deletion;
  throw ConfigError("unknown mask kind '" + name + "' (expected iid, rectangles or feature_deletion)");
}

std::string mask_kind_name(MaskKind kind) {
  switch (kind) {
    case MaskKind::iid:
      return "iid";
    case MaskKind::rectangles:
      return "rectangles";
    case MaskKind::feature_deletion:
      return "feature_deletion";
  }
  return "?";
}

MaskSpec parse_mask_param(MaskKind kind, const std::string& param) {
  const auto digits_only = [](const std::string& t) {
    return !t.empty() && std::all_of(t.begin(), t.end(), [](unsigned char c) { return std::isdigit(c) != 0; });
  };
  try {
    std::size_t used = 0;
    switch (kind) {
      case MaskKind::iid: {
        const double p = std::stod(param, &used);
        if (used != param.size()) break;
        MaskSpec s = MaskSpec::iid(p);
        s.validate();
        return s;
      }
      case MaskKind::rectangles: {
        const auto colon = param.find(':');
        if (colon == std::string::npos) break;
        const std::string a = param.substr(0, colon), b = param.substr(colon + 1);
        if (!digits_only(a) || !digits_only(b)) break;
        const unsigned long n = std::stoul(a, &used);
        if (used != a.size()) break;
        const unsigned long w = std::stoul(b, &used);
        if (used != b.size()) break;
        return MaskSpec::rects(n, w);
      }
      case MaskKind::feature_deletion: {
        if (!digits_only(param)) break;
        const unsigned long n = std::stoul(param, &used);
        if (used != param.size()) break;
        return MaskSpec::feature_deletion(n);
      }
    }
  } catch (const std::logic_error&) {
  }
  throw ConfigError("bad mask parameter '" + param + "' for " + mask_kind_name(kind));
}

std::vector<EvalRow> cmd_eval(const std::filesystem::path& config, const std::filesystem::path& checkpoint,
                              const MaskGrid& grid, const CommonOptions& options) {
  const ExperimentConfig cfg = load_config(config);
  std::vector<MaskSpec> specs;
  for (const auto& p : grid.params) specs.push_back(parse_mask_param(grid.kind, p));
  const ExperimentData data = prepare_data(cfg, cfg.train.seed);
  const Network net = load_network(checkpoint);
  check_compatible(net, data);
  const std::uint64_t seed = run_seed(cfg, options);
  const ClassPrior prior = ClassPrior::uniform(data.classes);
  const BatchOptions batch{options.threads, {}};
  const auto means = coordinate_means(data.train);
  const std::size_t n = data.test_images.size();

  std::vector<EvalRow> rows;
  for (std::size_t c = 0; c < specs.size(); ++c) {
    std::vector<MaskedInstance> marg(n), zero(n), mean(n), knn_in(n);
    for (std::size_t i = 0; i < n; ++i) {
      Rng rng = Rng(seed).derive(kEvalStream).derive(c).derive(i);
      const Image& img = data.test_images[i];
      const auto mask = generate_mask(specs[c], img, rng);
      const Image zeroed = apply_zeroing(img, mask);
      marg[i] = patchify(zeroed, data.layout, mask);
      zero[i] = impute(marg[i], ImputeMethod::zero);
      mark_padding_missing(zero[i], data.layout);
      mean[i] = impute(marg[i], ImputeMethod::mean, means);
      mark_padding_missing(mean[i], data.layout);
      knn_in[i] = grid.kind == MaskKind::feature_deletion ? patchify(zeroed, data.layout) : marg[i];
    }
    EvalRow row;
    row.kind = mask_kind_name(grid.kind);
    row.param = grid.params[c];
    row.tmm = accuracy(batch_predict(net, marg, prior, batch), data.test.labels);
    row.knn = accuracy(knn_batch(data.train, knn_in, options.threads), data.test.labels);
    row.zero_impute = accuracy(batch_predict(net, zero, prior, batch), data.test.labels);
    row.mean_impute = accuracy(batch_predict(net, mean, prior, batch), data.test.labels);
    rows.push_back(row);
  }
  auto out = open_output(options, "eval.csv");
  out << "# tmmkit-csv v1\n";
  out << "kind,param,tmm,knn,zero_impute,mean_impute\n";
  for (const auto& r : rows) {
    out << r.kind << ',' << r.param << ',' << fixed(r.tmm) << ',' << fixed(r.knn) << ',' << fixed(r.zero_impute)
        << ',' << fixed(r.mean_impute) << '\n';
  }
  return rows;
}

std::vector<DeletionRow> cmd_feature_deletion(const std::filesystem::path& config,
                                              const std::optional<std::filesystem::path>& checkpoint,
                                              const std::vector<std::size_t>& deletions, std::size_t repeats,
                                              const CommonOptions& options) {
  ExperimentConfig cfg = load_config(config);
  if (repeats == 0) throw ConfigError("repeats must be positive");
  if (!cfg.data.digits.empty() && cfg.data.digits.size() != 2) throw ConfigError("data.digits: expected two digits");
  const std::uint64_t seed = run_seed(cfg, options);
  std::vector<DeletionRow> rows(deletions.size());
  for (std::size_t c = 0; c < deletions.size(); ++c) {
    rows[c].deletions = deletions[c];
    rows[c].repeats = repeats;
  }

  std::optional<ExperimentData> fixed_data;
  std::optional<Network> fixed_net;
  if (checkpoint) {
    fixed_data = prepare_data(cfg, cfg.train.seed);
    fixed_net = load_network(*checkpoint);
    check_compatible(*fixed_net, *fixed_data);
  }
  for (std::size_t rep = 0; rep < repeats; ++rep) {
    std::optional<ExperimentData> local_data;
    std::optional<Network> local_net;
    if (!checkpoint) {
      Rng rr = Rng(seed).derive(kRepeatStream).derive(rep);
      local_data = prepare_data(cfg, rr.next());
      local_net = train_model(cfg, *local_data, rr.next(), options.threads).net;
    }
    const ExperimentData& data = checkpoint ? *fixed_data : *local_data;
    const Network& net = checkpoint ? *fixed_net : *local_net;
    const ClassPrior prior = ClassPrior::uniform(data.classes);
    const BatchOptions batch{options.threads, {}};
    const std::size_t n = data.test_images.size();
    for (std::size_t c = 0; c < deletions.size(); ++c) {
      std::vector<MaskedInstance> marg(n), zero(n);
      for (std::size_t i = 0; i < n; ++i) {
        // The stream ignores N_del, so larger deletions extend smaller ones.
        Rng rng = Rng(seed).derive(kDeletionStream).derive(rep).derive(i);
        const Image& img = data.test_images[i];
        const auto mask = generate_mask(MaskSpec::feature_deletion(deletions[c]), img, rng);
        const Image zeroed = apply_zeroing(img, mask);
        marg[i] = patchify(zeroed, data.layout, mask);
        zero[i] = patchify(zeroed, data.layout);
      }
      rows[c].tmm += accuracy(batch_predict(net, marg, prior, batch), data.test.labels);
      rows[c].zero_impute += accuracy(batch_predict(net, zero, prior, batch), data.test.labels);
      rows[c].knn += accuracy(knn_batch(data.train, zero, options.threads), data.test.labels);
    }
  }
  for (auto& r : rows) {
    r.tmm /= static_cast<double>(repeats);
    r.zero_impute /= static_cast<double>(repeats);
    r.knn /= static_cast<double>(repeats);
  }
  auto out = open_output(options, "feature_deletion.csv");
  out << "# tmmkit-csv v1\n";
  out << "n_del,repeats,tmm,zero_impute,knn\n";
  for (const auto& r : rows) {
    out << r.deletions << ',' << r.repeats << ',' << fixed(r.tmm) << ',' << fixed(r.zero_impute) << ','
        << fixed(r.knn) << '\n';
  }
  return rows;
}

void cmd_sample(const std::filesystem::path& checkpoint, std::size_t count, const CommonOptions& options) {
  const Network net = load_network(checkpoint);
  const Topology& t = net.topology();
  const Rng root(options.seed.value_or(0));
  std::vector<MaskedInstance> all;
  std::vector<std::size_t> labels;
  for (std::size_t y = 0; y < net.classes(); ++y) {
    Rng rng = root.derive(y);
    std::vector<Image> tiles;
    for (std::size_t k = 0; k < count; ++k) {
      all.push_back(sample(net, y, rng));
      labels.push_back(y);
      tiles.push_back(instance_image(all.back(), t.grid_height, t.grid_width, net.patch_shape()));
    }
    auto out = open_output(options, "samples_class" + std::to_string(y) + ".pgm", true);
    write_pgm(out, montage(tiles, std::min<std::size_t>(std::max<std::size_t>(count, 1), 10)));
  }
  {
    auto out = open_output(options, "samples.csv");
    write_samples_csv(out, all, labels);
  }
  for (std::size_t l = 0; l < t.depth(); ++l) {
    std::vector<Image> neurons;
    for (std::size_t g = 0; g < std::min<std::size_t>(t.levels[l].width, 64); ++g) {
      neurons.push_back(stretch_contrast(visualize_neuron(net, NeuronRef{l + 1, 0, g})));
    }
    auto out = open_output(options, "neurons_layer" + std::to_string(l + 1) + ".pgm", true);
    write_pgm(out, montage(neurons, 8));
  }
}

std::vector<oracle::SuiteReport> cmd_oracle(const std::string& suite,
                                            const std::optional<std::filesystem::path>& checkpoint,
                                            const CommonOptions& options) {
  using namespace oracle;
  const std::uint64_t seed = options.seed.value_or(0);
  const std::vector<std::string> names = {"forward_equivalence", "marginalization", "gradient",   "depth_efficiency",
                                          "gmm_equivalence",     "sampling",        "imputation_gap", "simplex"};
  if (suite != "all" && std::find(names.begin(), names.end(), suite) == names.end()) {
    throw ConfigError("unknown oracle suite '" + suite + "'");
  }
  std::vector<SuiteReport> out;
  for (std::size_t k = 0; k < names.size(); ++k) {
    const std::string& name = names[k];
    if (suite != "all" && suite != name) continue;
    const std::uint64_t s = Rng(seed).derive(k).next();
    if (name == "forward_equivalence") out.push_back(forward_equivalence_suite(200, s));
    if (name == "marginalization") out.push_back(marginalization_suite(100, s));
    if (name == "gradient") out.push_back(gradient_suite(100, s));
    if (name == "depth_efficiency") out.push_back(depth_efficiency_suite(100, s));
    if (name == "gmm_equivalence") out.push_back(gmm_suite(50, s));
    if (name == "sampling") out.push_back(sampling_suite(20, 100000, s));
    if (name == "imputation_gap") out.push_back(imputation_gap_suite());
    if (name == "simplex") {
      if (checkpoint) {
        out.push_back(simplex_suite(load_network(*checkpoint)));
      } else {
        Rng rng(s);
        out.push_back(simplex_suite(random_network(RandomNetSpec{}, rng)));
      }
    }
  }
  return out;
}

}  // namespace tmm::cli
