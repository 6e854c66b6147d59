#pragma once

#include <cmath>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>

#include "tumornet/adamax.hpp"
#include "tumornet/checkpoint.hpp"
#include "tumornet/dataset.hpp"
#include "tumornet/history.hpp"
#include "tumornet/loss.hpp"
#include "tumornet/metrics.hpp"
#include "tumornet/network.hpp"

namespace tumornet {

struct TrainConfig {
  std::size_t epochs = 50;
  std::size_t batch_size = 32;
  std::size_t patience = 5;
  double min_delta = 0.0;  // improvement means val_loss < best - min_delta
  AdamaxHyper optimizer{};
  LossReduction reduction = LossReduction::Mean;
  std::uint64_t init_seed = 1;
  std::uint64_t shuffle_seed = 2;
  std::uint64_t augment_seed = 3;
  std::optional<AugmentParams> augment = AugmentParams{};
  std::filesystem::path checkpoint_path;  // empty: keep the best model in memory only
  std::map<std::string, std::string> checkpoint_metadata;

  void validate() const {
    if (epochs < 1) throw ConfigError("epochs must be >= 1", "train.epochs");
    if (patience < 1) throw ConfigError("patience must be >= 1", "train.patience");
    if (batch_size < 1) throw ConfigError("batch size must be >= 1", "train.batch_size");
    if (!(min_delta >= 0)) throw ConfigError("min_delta must be >= 0", "train.min_delta");
    optimizer.validate();
    if (augment) augment->validate();
  }
};

/// True when no strict improvement (beyond `min_delta`) happened within the
/// last `patience` entries, i.e. the running best is `patience` or more
/// epochs old.
inline bool early_stop_check(std::span<const double> val_losses, std::size_t patience, double min_delta = 0.0) {
  if (val_losses.empty()) return false;
  std::size_t best = 0;
  for (std::size_t i = 1; i < val_losses.size(); ++i)
    if (val_losses[i] < val_losses[best] - min_delta) best = i;
  return val_losses.size() - 1 - best >= patience;
}

/// Epoch driver shared by train() and scripted tests. `run_epoch(epoch)`
/// returns the finished record; `on_improvement(record)` fires whenever the
/// validation loss strictly improves on the best so far.
inline TrainingHistory run_epochs(std::size_t max_epochs, std::size_t patience, double min_delta,
                                  const std::function<EpochRecord(std::size_t)>& run_epoch,
                                  const std::function<void(const EpochRecord&)>& on_improvement) {
  TrainingHistory h;
  std::vector<double> losses;
  double best = 0;
  for (std::size_t epoch = 1; epoch <= max_epochs; ++epoch) {
    EpochRecord rec = run_epoch(epoch);
    rec.epoch = epoch;
    h.records.push_back(rec);
    losses.push_back(rec.val_loss);
    if (h.best_epoch == 0 || rec.val_loss < best - min_delta) {
      best = rec.val_loss;
      h.best_epoch = epoch;
      on_improvement(rec);
    }
    if (early_stop_check(losses, patience, min_delta)) {
      h.stop_reason = StopReason::EarlyStopping;
      return h;
    }
  }
  h.stop_reason = StopReason::MaxEpochs;
  return h;
}

struct PassResult {
  double loss = 0;  // mean per sample
  double accuracy = 0;
  std::vector<std::size_t> truth;
  std::vector<std::size_t> predicted;
};

/// Inference-mode pass over a partition: no augmentation, no shuffling,
/// frozen batchnorm statistics.
template <class T>
PassResult evaluate_partition(const ModelSpec& model, const ParameterSet<T>& params, const DatasetIndex& part,
                              ImageStore<T>& store, std::size_t batch_size) {
  auto batches = make_batches<T>(part, batch_size, false, 0, store);
  PassResult r;
  double loss_sum = 0;
  Rng unused(0);
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const auto batch = batches[b];
    const auto fwd = forward_pass(model, params, batch.images, Mode::Infer, unused);
    for (double v : cross_entropy_rows(fwd.probabilities, batch.labels)) loss_sum += v;
    const auto pred = argmax_rows(fwd.probabilities);
    r.truth.insert(r.truth.end(), batch.class_ids.begin(), batch.class_ids.end());
    r.predicted.insert(r.predicted.end(), pred.begin(), pred.end());
  }
  std::size_t correct = 0;
  for (std::size_t i = 0; i < r.truth.size(); ++i) correct += r.truth[i] == r.predicted[i];
  r.loss = loss_sum / static_cast<double>(r.truth.size());
  r.accuracy = static_cast<double>(correct) / static_cast<double>(r.truth.size());
  return r;
}

struct TrainResult {
  TrainingHistory history;
  Checkpoint best;
};

/// Adamax training with per-epoch validation, best-model checkpointing on
/// validation loss and early stopping. Deterministic under the three seeds.
/// Throws DivergenceError on a non-finite loss; the last written checkpoint
/// stays on disk.
inline TrainResult train(const ModelSpec& model, const SplitResult& data, const TrainConfig& cfg,
                         ImageStore<float>& store, std::ostream* log = nullptr) {
  cfg.validate();
  validate(model);
  if (data.train.entries.empty() || data.validation.entries.empty()) {
    throw DataError("training and validation partitions must be non-empty");
  }
  if (data.train.class_count() != model.class_count) {
    throw DataError("model has " + std::to_string(model.class_count) + " classes, dataset has " +
                    std::to_string(data.train.class_count()));
  }

  Rng init_rng(cfg.init_seed);
  ParameterSet<float> params = init_parameters<float>(model, init_rng);
  AdamaxState<float> opt = AdamaxState<float>::zeros_like(params.params);
  TrainResult result;

  auto run_epoch = [&](std::size_t epoch) {
    auto batches = make_batches<float>(data.train, cfg.batch_size, true, derive_seed(cfg.shuffle_seed, epoch), store,
                                       cfg.augment, derive_seed(cfg.augment_seed, epoch));
    Rng dropout_rng(derive_seed(derive_seed(cfg.init_seed, 0xD809), epoch));
    double loss_sum = 0;
    std::size_t correct = 0, seen = 0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto batch = batches[b];
      try {
        auto fwd = forward_pass(model, params, batch.images, Mode::Train, dropout_rng);
        const double loss = categorical_cross_entropy(fwd.probabilities, batch.labels, LossReduction::Sum);
        if (!std::isfinite(loss)) throw NumericError("loss is not finite");
        const auto grad_logits = softmax_cross_entropy_gradient(fwd.logits, batch.labels, cfg.reduction);
        const auto grads = backward_from_logits(model, params, fwd.cache, grad_logits);
        adamax_step(params.params, grads, opt, cfg.optimizer);
        commit_running_stats(model, params, fwd.cache);
        loss_sum += loss;
        const auto pred = argmax_rows(fwd.probabilities);
        for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == batch.class_ids[i];
        seen += pred.size();
      } catch (const NumericError& e) {
        throw DivergenceError("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                              std::to_string(b) + ": " + e.what());
      }
    }
    EpochRecord rec;
    rec.train_loss = loss_sum / static_cast<double>(seen);
    rec.train_accuracy = static_cast<double>(correct) / static_cast<double>(seen);
    PassResult val;
    try {
      val = evaluate_partition(model, params, data.validation, store, cfg.batch_size);
    } catch (const NumericError& e) {
      throw DivergenceError("validation diverged at epoch " + std::to_string(epoch) + ": " + e.what());
    }
    if (!std::isfinite(val.loss)) throw DivergenceError("validation loss is not finite at epoch " + std::to_string(epoch));
    rec.val_loss = val.loss;
    rec.val_accuracy = val.accuracy;
    if (log) {
      *log << "epoch " << epoch << ": train_loss=" << text::fixed(rec.train_loss, 4)
           << " train_acc=" << text::fixed(rec.train_accuracy, 4) << " val_loss=" << text::fixed(rec.val_loss, 4)
           << " val_acc=" << text::fixed(rec.val_accuracy, 4) << std::endl;
    }
    return rec;
  };

  auto on_improvement = [&](const EpochRecord& rec) {
    result.best.model = model;
    result.best.params = params;
    result.best.class_names = data.train.class_names;
    result.best.epoch = rec.epoch;
    result.best.validation_loss = rec.val_loss;
    result.best.metadata = cfg.checkpoint_metadata;
    if (!cfg.checkpoint_path.empty()) save_checkpoint(result.best, cfg.checkpoint_path);
  };

  result.history = run_epochs(cfg.epochs, cfg.patience, cfg.min_delta, run_epoch, on_improvement);
  return result;
}

/// Scores a checkpoint on a partition whose class names must match.
inline EvaluationReport evaluate(const Checkpoint& ck, const DatasetIndex& part, ImageStore<float>& store,
                                 std::size_t batch_size = 32) {
  if (part.class_names != ck.class_names) {
    throw ClassMismatchError("checkpoint classes do not match the dataset classes");
  }
  if (part.entries.empty()) throw DataError("cannot evaluate an empty partition");
  const auto pass = evaluate_partition(ck.model, ck.params, part, store, batch_size);
  return make_report(pass.truth, pass.predicted, ck.class_names, pass.loss);
}

} // namespace tumornet
