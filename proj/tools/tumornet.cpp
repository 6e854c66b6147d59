// Command-line front end: train, evaluate, predict, make-fixtures.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "tumornet/commands.hpp"

namespace {

using namespace tumornet;

int run_train(const std::string& config_path, const std::string& dataset, const std::string& out_dir,
              const std::optional<std::uint64_t>& seed, const std::vector<std::string>& overrides) {
  RunConfig cfg;
  try {
    if (!config_path.empty()) cfg = load_config_file(config_path);
    if (!dataset.empty()) cfg.dataset_root = dataset;
    if (!out_dir.empty()) cfg.output_dir = out_dir;
    if (seed) apply_seed(cfg, *seed);
    for (const auto& kv : overrides) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'", kv);
      set_config_value(cfg, std::string(text::trim(kv.substr(0, eq))), std::string(text::trim(kv.substr(eq + 1))));
    }
  } catch (const ConfigError& e) {
    std::cerr << "error: config: " << describe(e) << std::endl;
    return kExitConfig;
  }
  return cmd_train(cfg);
}

} // namespace

int main(int argc, char** argv) {
  CLI::App app{"Brain MRI tumor classifier: custom CNN trained with Adamax"};
  app.require_subcommand(1);

  std::string config_path, dataset, out_dir;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> overrides;
  auto* train = app.add_subcommand("train", "scan, split and train; writes checkpoint, history and manifest");
  train->add_option("--config", config_path, "key = value configuration file");
  train->add_option("--dataset", dataset, "dataset root: one subdirectory per class");
  train->add_option("--out", out_dir, "output directory for this run");
  train->add_option("--seed", seed, "sets init/shuffle/augment/split seeds to n, n+1, n+2, n+3");
  train->add_option("--set", overrides, "override one config key, e.g. --set train.epochs=10");

  std::string ck_path, split = "test";
  std::size_t batch_size = 32;
  auto* evaluate = app.add_subcommand("evaluate", "classification report for one dataset partition");
  evaluate->add_option("--checkpoint", ck_path, "checkpoint file")->required();
  evaluate->add_option("--dataset", dataset, "dataset root")->required();
  evaluate->add_option("--split", split, "train, val, test or all")->capture_default_str();
  evaluate->add_option("--out", out_dir, "report directory (default: next to the checkpoint)");
  evaluate->add_option("--batch-size", batch_size, "inference batch size")->capture_default_str();

  std::string image;
  auto* predict = app.add_subcommand("predict", "classify one image");
  predict->add_option("--checkpoint", ck_path, "checkpoint file")->required();
  predict->add_option("--image,image", image, "image file")->required();

  std::size_t per_class = 25, size = 64;
  std::uint64_t fixture_seed = 7;
  auto* fixtures = app.add_subcommand("make-fixtures", "write a synthetic four-class dataset");
  fixtures->add_option("--out", out_dir, "dataset root to create")->required();
  fixtures->add_option("--per-class", per_class, "images per class")->capture_default_str();
  fixtures->add_option("--seed", fixture_seed, "generator seed")->capture_default_str();
  fixtures->add_option("--size", size, "image side length in pixels")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  if (*train) return run_train(config_path, dataset, out_dir, seed, overrides);
  if (*evaluate) return cmd_evaluate(ck_path, dataset, split, out_dir, batch_size);
  if (*predict) return cmd_predict(ck_path, image);
  if (*fixtures) return cmd_make_fixtures(out_dir, per_class, fixture_seed, size);
  return kExitUsage;
}
