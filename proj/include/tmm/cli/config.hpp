#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tmm/factorization.hpp"
#include "tmm/network.hpp"
#include "tmm/training.hpp"

namespace tmm::cli {

struct DataConfig {
  std::filesystem::path images;
  std::filesystem::path labels;
  /// Digits to keep, mapped to classes 0, 1, ...; empty keeps all ten.
  std::vector<std::size_t> digits;
  std::size_t train_per_class = 300;
  std::size_t test_per_class = 200;
};

struct ModelConfig {
  std::size_t components = 8;
  PatchShape patch{2, 2};
  /// Hidden levels bottom-up; the product of the pooling windows fixes the patch grid.
  std::vector<LevelSpec> levels;
  /// "data": Gaussian means from random training patches; "random": standard normal means.
  std::string init = "data";
};

struct ExperimentConfig {
  DataConfig data;
  ModelConfig model;
  TrainConfig train;
  /// Write a checkpoint every this many iterations (0 = only at the end).
  std::size_t checkpoint_every = 0;
};

/// Parses the JSON config. Relative data paths are resolved against
/// `base_dir`. Throws ConfigError naming the offending key path.
ExperimentConfig parse_config(const std::string& text, const std::filesystem::path& base_dir);
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace tmm::cli
