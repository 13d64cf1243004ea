#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tmm/cli/commands.hpp"
#include "tmm/errors.hpp"

namespace tmm::cli {

namespace {

std::string format_row(const EvalRow& r) {
  std::ostringstream s;
  s << r.kind << ' ' << r.param << ": tmm=" << r.tmm << " knn=" << r.knn << " zero=" << r.zero_impute
    << " mean=" << r.mean_impute;
  return s.str();
}

}  // namespace

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tensorial mixture models: training, marginalized inference and sampling", "tmmkit"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 0;
  CommonOptions common;
  auto* seed_opt = app.add_option("--seed", seed, "Seed for every random stream (default: config seed or 0)");
  app.add_option("--threads", common.threads, "Worker threads")->check(CLI::PositiveNumber);
  app.add_option("--out-dir", common.out_dir, "Directory for output files");

  std::string config, checkpoint, suite = "all", mask_kind = "iid";
  std::vector<std::string> mask_params;
  std::vector<std::size_t> deletions;
  std::size_t count = 10, repeats = 1;

  auto* train = app.add_subcommand("train", "Train a model from a JSON config");
  train->add_option("--config", config, "Experiment config")->required()->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("eval", "Accuracy under missing data versus baselines");
  eval->add_option("--config", config, "Experiment config")->required()->check(CLI::ExistingFile);
  eval->add_option("--checkpoint", checkpoint, "Trained model")->required()->check(CLI::ExistingFile);
  eval->add_option("--mask-kind", mask_kind, "iid, rectangles or feature_deletion")
      ->check(CLI::IsMember({"iid", "rectangles", "feature_deletion"}));
  eval->add_option("--mask-param", mask_params, "Grid of mask parameters: p, n:W or N_del")->delimiter(',');

  auto* fd = app.add_subcommand("feature-deletion", "Accuracy when random non-zero pixels are zeroed");
  fd->add_option("--config", config, "Experiment config")->required()->check(CLI::ExistingFile);
  auto* fd_ckpt = fd->add_option("--checkpoint", checkpoint, "Reuse this model instead of training per repeat")
                      ->check(CLI::ExistingFile);
  fd->add_option("--ndel", deletions, "Numbers of deleted pixels")->required()->delimiter(',');
  fd->add_option("--repeats", repeats, "Repeats to average over")->check(CLI::PositiveNumber);

  auto* smp = app.add_subcommand("sample", "Draw class-conditional samples and visualize neurons");
  smp->add_option("--checkpoint", checkpoint, "Trained model")->required()->check(CLI::ExistingFile);
  smp->add_option("--count", count, "Samples per class");

  auto* orc = app.add_subcommand("oracle", "Run the reference checks");
  orc->add_option("--suite", suite, "Suite name or all");
  auto* orc_ckpt = orc->add_option("--checkpoint", checkpoint, "Model for the simplex suite")->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }
  if (seed_opt->count() > 0) common.seed = seed;

  try {
    if (train->parsed()) {
      const TrainResult r = cmd_train(config, common);
      out << "iterations=" << r.trace.size() << " train_accuracy=" << r.train_accuracy
          << " test_accuracy=" << r.test_accuracy << '\n';
    } else if (eval->parsed()) {
      const MaskGrid grid{parse_mask_kind(mask_kind), mask_params};
      for (const EvalRow& r : cmd_eval(config, checkpoint, grid, common)) out << format_row(r) << '\n';
    } else if (fd->parsed()) {
      std::optional<std::filesystem::path> ckpt;
      if (fd_ckpt->count() > 0) ckpt = checkpoint;
      for (const DeletionRow& r : cmd_feature_deletion(config, ckpt, deletions, repeats, common)) {
        out << "n_del=" << r.deletions << " tmm=" << r.tmm << " zero=" << r.zero_impute << " knn=" << r.knn << '\n';
      }
    } else if (smp->parsed()) {
      cmd_sample(checkpoint, count, common);
      out << "wrote samples to " << common.out_dir.string() << '\n';
    } else if (orc->parsed()) {
      std::optional<std::filesystem::path> ckpt;
      if (orc_ckpt->count() > 0) ckpt = checkpoint;
      bool ok = true;
      for (const auto& r : cmd_oracle(suite, ckpt, common)) {
        out << oracle::format_report(r) << '\n';
        ok = ok && r.passed;
      }
      return ok ? 0 : 1;
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace tmm::cli
