#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqformer/loss.hpp"
#include "seqformer/model.hpp"
#include "seqformer/optim.hpp"

namespace seqformer {

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double lr = 0.0;
};

struct TrainOptions {
  int max_epochs = 2000;
  int batch_size = 64;
  double learning_rate = 1e-4;
  int early_stop_patience = 150;
  PlateauOptions scheduler;
  std::uint64_t seed = 0;
  /// Worker threads for the per-batch forward/backward. Results do not depend
  /// on this value: batches are always split into the same fixed-size chunks.
  int threads = 1;
  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainingState {
  int epoch = 0;
  double lr = 0.0;
  double best_val_loss = 0.0;
  int best_epoch = 0;
  std::string rng_state;

  nlohmann::json to_json() const;
  static TrainingState from_json(const nlohmann::json& j);
};

struct TrainResult {
  SeqFormer model;  // best-validation snapshot
  std::vector<EpochRecord> history;
  TrainingState state;
  bool stopped_early = false;
};

/// Mean over the selected windows of the per-window balanced MSE (mg/dL). With
/// grads non-null, accumulates the gradient of that mean.
double batch_loss(const SeqFormer& model, std::span<const GlucoseWindow> windows,
                  std::span<const std::size_t> indices, const EventWeights& weights, Mode mode,
                  Rng& rng, Gradients* grads);

/// Eval-mode mean per-window loss over all windows. Does not touch the model.
double evaluate_loss(const SeqFormer& model, std::span<const GlucoseWindow> windows,
                     const EventWeights& weights);

/// Adam + reduce-on-plateau + early stopping over shuffled mini-batches.
/// Throws TrainingError when a batch loss is not finite.
TrainResult train_loop(const ModelConfig& config, std::span<const GlucoseWindow> train,
                       std::span<const GlucoseWindow> val, const EventWeights& weights,
                       const TrainOptions& options);

/// Same as train_loop but starting from the given parameters.
TrainResult train_loop(SeqFormer initial, std::span<const GlucoseWindow> train,
                       std::span<const GlucoseWindow> val, const EventWeights& weights,
                       const TrainOptions& options);

std::string history_csv(std::span<const EpochRecord> history);

}  // namespace seqformer
