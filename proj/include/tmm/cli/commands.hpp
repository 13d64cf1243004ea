#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tmm/cli/config.hpp"
#include "tmm/data_io.hpp"
#include "tmm/image.hpp"
#include "tmm/missingness.hpp"
#include "tmm/network.hpp"
#include "tmm/oracle.hpp"
#include "tmm/training.hpp"

namespace tmm::cli {

struct CommonOptions {
  std::optional<std::uint64_t> seed;  ///< overrides the config seed
  std::size_t threads = 1;
  std::filesystem::path out_dir = ".";
};

/// Train/test split of the configured digits, as images and as patched instances.
struct ExperimentData {
  PatchLayout layout;
  std::vector<Image> train_images;
  std::vector<Image> test_images;
  Dataset train;
  Dataset test;
  std::size_t classes = 0;
};

/// Patch grid fixed by the product of the pooling windows; the image must fit.
PatchLayout layout_for(const ModelConfig& model, std::size_t height, std::size_t width);

/// Per class (in digit order): the matching images in file order are shuffled
/// with `seed`, the first train_per_class go to training and the next
/// test_per_class to testing.
ExperimentData prepare_data(const ExperimentConfig& cfg, std::uint64_t seed);

/// Gaussian network of the configured architecture with random weights and
/// components initialized per the config.
Network build_network(const ExperimentConfig& cfg, const ExperimentData& data, std::uint64_t seed);

struct TrainResult {
  Network net;
  std::vector<TraceRow> trace;
  double train_accuracy = 0.0;
  double test_accuracy = 0.0;
};

/// Writes model.tmm, loss.csv and train_summary.csv under the output directory
/// (plus model-<iteration>.tmm when checkpointing is enabled).
TrainResult cmd_train(const std::filesystem::path& config, const CommonOptions& options);

/// Masks to evaluate: each parameter is p (iid), "n:W" (rectangles) or N_del.
struct MaskGrid {
  MaskKind kind = MaskKind::iid;
  std::vector<std::string> params;
};

MaskSpec parse_mask_param(MaskKind kind, const std::string& param);
MaskKind parse_mask_kind(const std::string& name);
std::string mask_kind_name(MaskKind kind);

struct EvalRow {
  std::string kind;
  std::string param;
  double tmm = 0.0;
  double knn = 0.0;
  double zero_impute = 0.0;
  double mean_impute = 0.0;
};

/// Accuracy of marginalized prediction and of the baselines on the test split
/// for every mask in the grid; writes eval.csv.
std::vector<EvalRow> cmd_eval(const std::filesystem::path& config, const std::filesystem::path& checkpoint,
                              const MaskGrid& grid, const CommonOptions& options);

struct DeletionRow {
  std::size_t deletions = 0;
  std::size_t repeats = 0;
  double tmm = 0.0;
  double zero_impute = 0.0;
  double knn = 0.0;
};

/// Feature-deletion table: for each repeat a fresh corrupted test set (and,
/// without a checkpoint, a freshly trained model on a new training subset);
/// accuracies averaged over repeats. Writes feature_deletion.csv.
std::vector<DeletionRow> cmd_feature_deletion(const std::filesystem::path& config,
                                              const std::optional<std::filesystem::path>& checkpoint,
                                              const std::vector<std::size_t>& deletions, std::size_t repeats,
                                              const CommonOptions& options);

/// Draws `count` samples per class and visualizes up to 64 channels of every
/// hidden level; writes samples.csv, samples_class<y>.pgm and neurons_layer<l>.pgm.
void cmd_sample(const std::filesystem::path& checkpoint, std::size_t count, const CommonOptions& options);

/// Runs the selected oracle suites ("all" or a suite name); with a checkpoint
/// the simplex suite checks it, otherwise a random network.
std::vector<oracle::SuiteReport> cmd_oracle(const std::string& suite,
                                            const std::optional<std::filesystem::path>& checkpoint,
                                            const CommonOptions& options);

/// Command-line entry point. Exit codes: 0 ok, 1 runtime failure, 2 usage.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace tmm::cli
