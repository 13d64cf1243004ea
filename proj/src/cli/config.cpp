#include "tmm/cli/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tmm/errors.hpp"

namespace tmm::cli {

namespace {

using nlohmann::json;

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ConfigError(path + ": " + what); }

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) fail(path.empty() ? "<root>" : path, "expected an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items()) {
    if (!ok.contains(key)) fail(path.empty() ? key : path + "." + key, "unknown key");
  }
}

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

std::size_t as_size(const json& v, const std::string& path) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0)) {
    fail(path, "expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

double as_double(const json& v, const std::string& path) {
  if (!v.is_number()) fail(path, "expected a number");
  return v.get<double>();
}

std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) fail(path, "expected a string");
  return v.get<std::string>();
}

std::vector<std::size_t> as_sizes(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array");
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(as_size(v[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

std::vector<double> as_doubles(const json& v, const std::string& path) {
  if (!v.is_array()) fail(path, "expected an array");
  std::vector<double> out;
  for (std::size_t k = 0; k < v.size(); ++k) out.push_back(as_double(v[k], path + "[" + std::to_string(k) + "]"));
  return out;
}

std::pair<std::size_t, std::size_t> as_pair(const json& v, const std::string& path) {
  const auto s = as_sizes(v, path);
  if (s.size() != 2) fail(path, "expected [height, width]");
  return {s[0], s[1]};
}

Sharing as_sharing(const json& v, const std::string& path) {
  const std::string s = as_string(v, path);
  if (s == "unshared") return Sharing::unshared;
  if (s == "shared") return Sharing::shared;
  if (s == "window") return Sharing::window;
  fail(path, "expected one of unshared, shared, window");
}

DataConfig parse_data(const json& j, const std::string& path, const std::filesystem::path& base) {
  check_keys(j, path, {"images", "labels", "digits", "train_per_class", "test_per_class"});
  DataConfig d;
  if (!j.contains("images") || !j.contains("labels")) fail(path, "images and labels are required");
  auto resolve = [&](const std::filesystem::path& p) { return p.is_absolute() ? p : base / p; };
  d.images = resolve(as_string(j["images"], join(path, "images")));
  d.labels = resolve(as_string(j["labels"], join(path, "labels")));
  if (j.contains("digits")) d.digits = as_sizes(j["digits"], join(path, "digits"));
  for (std::size_t k = 0; k < d.digits.size(); ++k)
    if (d.digits[k] > 9) fail(join(path, "digits") + "[" + std::to_string(k) + "]", "digit out of range");
  if (j.contains("train_per_class")) d.train_per_class = as_size(j["train_per_class"], join(path, "train_per_class"));
  if (j.contains("test_per_class")) d.test_per_class = as_size(j["test_per_class"], join(path, "test_per_class"));
  return d;
}

ModelConfig parse_model(const json& j, const std::string& path) {
  check_keys(j, path, {"components", "patch", "levels", "init"});
  ModelConfig m;
  if (j.contains("components")) m.components = as_size(j["components"], join(path, "components"));
  if (m.components == 0) fail(join(path, "components"), "must be positive");
  if (j.contains("patch")) {
    const auto [h, w] = as_pair(j["patch"], join(path, "patch"));
    m.patch = {h, w};
  }
  if (m.patch.size() == 0) fail(join(path, "patch"), "must be non-empty");
  if (!j.contains("levels")) fail(path, "levels are required");
  const json& levels = j["levels"];
  if (!levels.is_array() || levels.empty()) fail(join(path, "levels"), "expected a non-empty array");
  for (std::size_t k = 0; k < levels.size(); ++k) {
    const std::string lp = join(path, "levels") + "[" + std::to_string(k) + "]";
    check_keys(levels[k], lp, {"width", "sharing", "pool"});
    LevelSpec spec;
    if (!levels[k].contains("width")) fail(lp, "width is required");
    spec.width = as_size(levels[k]["width"], lp + ".width");
    if (spec.width == 0) fail(lp + ".width", "must be positive");
    if (levels[k].contains("sharing")) spec.sharing = as_sharing(levels[k]["sharing"], lp + ".sharing");
    if (levels[k].contains("pool")) {
      const auto [h, w] = as_pair(levels[k]["pool"], lp + ".pool");
      spec.pool = {h, w};
    }
    if (spec.pool.size() == 0) fail(lp + ".pool", "must be non-empty");
    m.levels.push_back(spec);
  }
  if (j.contains("init")) {
    m.init = as_string(j["init"], join(path, "init"));
    if (m.init != "data" && m.init != "random") fail(join(path, "init"), "expected data or random");
  }
  return m;
}

TrainConfig parse_train(const json& j, const std::string& path) {
  check_keys(j, path,
             {"beta", "lambda", "learning_rate", "milestones", "factors", "optimizer", "beta1", "beta2", "epsilon",
              "momentum", "batch_size", "iterations", "marginalization_rates", "threads"});
  TrainConfig t;
  if (j.contains("beta")) t.beta = as_double(j["beta"], join(path, "beta"));
  if (j.contains("lambda")) t.lambda = as_double(j["lambda"], join(path, "lambda"));
  if (j.contains("learning_rate")) t.learning_rate = as_double(j["learning_rate"], join(path, "learning_rate"));
  if (j.contains("milestones")) t.milestones = as_sizes(j["milestones"], join(path, "milestones"));
  if (j.contains("factors")) t.factors = as_doubles(j["factors"], join(path, "factors"));
  if (j.contains("optimizer")) {
    const std::string o = as_string(j["optimizer"], join(path, "optimizer"));
    if (o == "adam") {
      t.optimizer = OptimizerKind::adam;
    } else if (o == "sgd_momentum") {
      t.optimizer = OptimizerKind::sgd_momentum;
    } else {
      fail(join(path, "optimizer"), "expected adam or sgd_momentum");
    }
  }
  if (j.contains("beta1")) t.beta1 = as_double(j["beta1"], join(path, "beta1"));
  if (j.contains("beta2")) t.beta2 = as_double(j["beta2"], join(path, "beta2"));
  if (j.contains("epsilon")) t.epsilon = as_double(j["epsilon"], join(path, "epsilon"));
  if (j.contains("momentum")) t.momentum = as_double(j["momentum"], join(path, "momentum"));
  if (j.contains("batch_size")) t.batch_size = as_size(j["batch_size"], join(path, "batch_size"));
  if (j.contains("iterations")) t.iterations = as_size(j["iterations"], join(path, "iterations"));
  if (j.contains("marginalization_rates")) {
    t.marginalization_rates = as_doubles(j["marginalization_rates"], join(path, "marginalization_rates"));
  }
  if (j.contains("threads")) t.threads = as_size(j["threads"], join(path, "threads"));
  try {
    t.validate();
  } catch (const ConfigError& e) {
    fail(path, e.what());
  }
  return t;
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(text, nullptr, true, true);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j, "", {"data", "model", "train", "seed", "checkpoint_every"});
  ExperimentConfig c;
  if (!j.contains("data")) fail("data", "section is required");
  if (!j.contains("model")) fail("model", "section is required");
  c.data = parse_data(j["data"], "data", base_dir);
  c.model = parse_model(j["model"], "model");
  if (j.contains("train")) c.train = parse_train(j["train"], "train");
  if (j.contains("seed")) c.train.seed = as_size(j["seed"], "seed");
  if (j.contains("checkpoint_every")) c.checkpoint_every = as_size(j["checkpoint_every"], "checkpoint_every");
  if (c.train.marginalization_rates.size() > c.model.levels.size()) {
    fail("train.marginalization_rates", "more rates than levels");
  }
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), path.parent_path());
}

}  // namespace tmm::cli
