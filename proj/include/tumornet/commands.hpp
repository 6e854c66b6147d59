#pragma once

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "tumornet/checkpoint.hpp"
#include "tumornet/config.hpp"
#include "tumornet/dataset.hpp"
#include "tumornet/fixtures.hpp"
#include "tumornet/history.hpp"
#include "tumornet/metrics.hpp"
#include "tumornet/train.hpp"

namespace tumornet {

enum ExitCode : int {
  kExitOk = 0,
  kExitUsage = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitDiverged = 4,
  kExitCheckpoint = 5,
};

inline constexpr const char* kCheckpointFile = "model.ckpt";
inline constexpr const char* kManifestFile = "run.cfg";

namespace detail {

// One line on stderr: "error: <kind>: <detail>".
inline int fail(std::ostream& err, int code, const char* kind, const std::string& msg) {
  err << "error: " << kind << ": " << msg << std::endl;
  return code;
}

inline std::string utc_timestamp(const char* fmt) {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[64];
  std::strftime(buf, sizeof buf, fmt, &tm);
  return buf;
}

inline std::map<std::string, std::string> split_metadata(const SplitSpec& s) {
  return {{"split.seed", std::to_string(s.seed)},
          {"split.test", text::format_double(s.test)},
          {"split.train", text::format_double(s.train)},
          {"split.val", text::format_double(s.validation)}};
}

inline SplitSpec split_from_metadata(const std::map<std::string, std::string>& m) {
  SplitSpec s;
  auto real = [&](const char* k, double& dst) {
    if (auto it = m.find(k); it != m.end())
      if (auto v = text::parse_double(it->second)) dst = *v;
  };
  real("split.train", s.train);
  real("split.val", s.validation);
  real("split.test", s.test);
  if (auto it = m.find("split.seed"); it != m.end())
    if (auto v = text::parse_uint(it->second)) s.seed = *v;
  return s;
}

} // namespace detail

/// scan -> split -> train; writes model.ckpt, history.csv, history.svg and
/// run.cfg (the resolved configuration) to the output directory.
inline int cmd_train(RunConfig cfg, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  ModelSpec model;
  try {
    cfg.validate();
    model = cfg.model();
  } catch (const ConfigError& e) {
    return detail::fail(err, kExitConfig, "config", describe(e));
  } catch (const ShapeError& e) {
    return detail::fail(err, kExitConfig, "config", e.what());
  }
  if (cfg.dataset_root.empty()) return detail::fail(err, kExitConfig, "config", "dataset.root is not set");

  SplitResult split;
  try {
    const auto scan = scan_dataset(cfg.dataset_root);
    for (const auto& w : scan.warnings) err << "warning: " << w << '\n';
    if (scan.index.class_count() != model.class_count) {
      return detail::fail(err, kExitData, "data",
                          "dataset has " + std::to_string(scan.index.class_count()) + " classes, model expects " +
                              std::to_string(model.class_count));
    }
    split = stratified_split(scan.index, cfg.split);
  } catch (const DataError& e) {
    return detail::fail(err, kExitData, "data", e.what());
  }

  if (cfg.output_dir.empty()) cfg.output_dir = "runs/run-" + detail::utc_timestamp("%Y%m%d-%H%M%S");
  std::error_code ec;
  std::filesystem::create_directories(cfg.output_dir, ec);
  if (ec || !std::filesystem::is_directory(cfg.output_dir)) {
    return detail::fail(err, kExitData, "data", "cannot create output directory " + cfg.output_dir.string());
  }

  try {
    write_text_file(cfg.output_dir / kManifestFile,
                    "# created " + detail::utc_timestamp("%Y-%m-%dT%H:%M:%SZ") + "\n" + config_to_text(cfg));
    TrainConfig tc = cfg.resolved_train();
    tc.checkpoint_path = cfg.output_dir / kCheckpointFile;
    tc.checkpoint_metadata = detail::split_metadata(cfg.split);
    ImageStore<float> store(model.input_shape[0], model.input_shape[1]);
    out << "train/val/test: " << split.train.size() << '/' << split.validation.size() << '/' << split.test.size()
        << '\n';
    const auto result = train(model, split, tc, store, &out);
    export_history(result.history, cfg.output_dir);
    const auto& best = result.history.records[result.history.best_epoch - 1];
    out << "stopped: " << stop_reason_name(result.history.stop_reason) << " after "
        << result.history.records.size() << " epochs\n";
    out << "best epoch " << best.epoch << ": val_loss=" << text::fixed(best.val_loss, 6)
        << " val_acc=" << text::fixed(best.val_accuracy, 4) << '\n';
    out << "checkpoint: " << tc.checkpoint_path.string() << '\n';
  } catch (const DivergenceError& e) {
    return detail::fail(err, kExitDiverged, "diverged", e.what());
  } catch (const ConfigError& e) {
    return detail::fail(err, kExitConfig, "config", describe(e));
  } catch (const DataError& e) {
    return detail::fail(err, kExitData, "data", e.what());
  } catch (const CheckpointError& e) {
    return detail::fail(err, kExitData, "io", e.what());
  }
  return kExitOk;
}

/// Scores a checkpoint on one partition of a dataset. The partition is
/// rebuilt from the split settings stored in the checkpoint. Writes
/// report_<split>.txt, report_<split>.csv, summary_<split>.csv and
/// confusion_<split>.csv.
inline int cmd_evaluate(const std::filesystem::path& checkpoint, const std::filesystem::path& dataset,
                        const std::string& split_name, std::filesystem::path out_dir, std::size_t batch_size = 32,
                        std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  if (split_name != "train" && split_name != "val" && split_name != "test" && split_name != "all") {
    return detail::fail(err, kExitConfig, "config", "--split must be train, val, test or all");
  }
  if (batch_size == 0) return detail::fail(err, kExitConfig, "config", "batch size must be >= 1");
  Checkpoint ck;
  try {
    ck = load_checkpoint(checkpoint);
  } catch (const CheckpointError& e) {
    return detail::fail(err, kExitCheckpoint, "checkpoint", e.what());
  }
  DatasetIndex part;
  try {
    const auto scan = scan_dataset(dataset);
    if (scan.index.class_names != ck.class_names) {
      return detail::fail(err, kExitCheckpoint, "class-mismatch",
                          "checkpoint classes do not match dataset classes in " + dataset.string());
    }
    if (split_name == "all") {
      part = scan.index;
    } else {
      const auto split = stratified_split(scan.index, detail::split_from_metadata(ck.metadata));
      part = split_name == "train" ? split.train : split_name == "val" ? split.validation : split.test;
    }
  } catch (const DataError& e) {
    return detail::fail(err, kExitData, "data", e.what());
  } catch (const ConfigError& e) {
    return detail::fail(err, kExitConfig, "config", describe(e));
  }
  if (part.entries.empty()) return detail::fail(err, kExitData, "data", "partition '" + split_name + "' is empty");

  if (out_dir.empty()) out_dir = checkpoint.has_parent_path() ? checkpoint.parent_path() : ".";
  try {
    ImageStore<float> store(ck.model.input_shape[0], ck.model.input_shape[1]);
    const auto report = evaluate(ck, part, store, batch_size);
    const std::string body = "split: " + split_name + "\n" + format_report(report);
    out << body;
    std::filesystem::create_directories(out_dir);
    write_text_file(out_dir / ("report_" + split_name + ".txt"), body);
    write_text_file(out_dir / ("report_" + split_name + ".csv"), report_csv(report));
    write_text_file(out_dir / ("summary_" + split_name + ".csv"), summary_csv(report));
    write_text_file(out_dir / ("confusion_" + split_name + ".csv"), confusion_csv(report));
  } catch (const ClassMismatchError& e) {
    return detail::fail(err, kExitCheckpoint, "class-mismatch", e.what());
  } catch (const DataError& e) {
    return detail::fail(err, kExitData, "data", e.what());
  } catch (const std::filesystem::filesystem_error& e) {
    return detail::fail(err, kExitData, "data", e.what());
  } catch (const NumericError& e) {
    return detail::fail(err, kExitCheckpoint, "checkpoint", e.what());
  }
  return kExitOk;
}

/// Prints the predicted class and every class probability to 6 decimals.
inline int cmd_predict(const std::filesystem::path& checkpoint, const std::filesystem::path& image,
                       std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  Checkpoint ck;
  try {
    ck = load_checkpoint(checkpoint);
  } catch (const CheckpointError& e) {
    return detail::fail(err, kExitCheckpoint, "checkpoint", e.what());
  }
  Tensor<float> x;
  try {
    x = load_and_preprocess<float>(image, ck.model.input_shape[0], ck.model.input_shape[1]);
  } catch (const DataError& e) {
    return detail::fail(err, kExitData, "data", e.what());
  }
  try {
    Rng unused(0);
    Shape batch_shape{1};
    batch_shape.insert(batch_shape.end(), x.shape().begin(), x.shape().end());
    const auto fwd = forward_pass(ck.model, ck.params, std::move(x).reshaped(batch_shape), Mode::Infer, unused);
    const auto k = argmax_rows(fwd.probabilities)[0];
    out << "prediction: " << ck.class_names[k] << '\n';
    for (std::size_t c = 0; c < ck.class_names.size(); ++c)
      out << ck.class_names[c] << ' ' << text::fixed(fwd.probabilities[c], 6) << '\n';
  } catch (const Error& e) {
    return detail::fail(err, kExitCheckpoint, "checkpoint", e.what());
  }
  return kExitOk;
}

inline int cmd_make_fixtures(const std::filesystem::path& root, std::size_t per_class, std::uint64_t seed,
                             std::size_t size = 64, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  if (per_class == 0 || size < 8) return detail::fail(err, kExitConfig, "config", "per-class >= 1 and size >= 8 required");
  try {
    make_fixtures(root, per_class, seed, size);
  } catch (const DataError& e) {
    return detail::fail(err, kExitData, "data", e.what());
  }
  out << "wrote " << per_class * kFixtureClasses.size() << " images to " << root.string() << '\n';
  return kExitOk;
}

} // namespace tumornet
