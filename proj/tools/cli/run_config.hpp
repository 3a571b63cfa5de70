#pragma once

#include <cstdint>
#include <string>

#include <nlohmann/json.hpp>
#include <seqformer/data.hpp>
#include <seqformer/model.hpp>
#include <seqformer/trainer.hpp>

namespace seqformer::cli {

enum class Modality { Single, Multi };

/// One experiment: horizon and modality fix T, L and F; the rest are model
/// and optimizer settings.
struct RunConfig {
  int ph_minutes = 30;
  Modality modality = Modality::Single;
  bool balanced = true;
  bool augment = false;
  std::uint64_t seed = 0;
  ModelConfig model;  // observed_len / forecast_len / feature_count follow ph and modality
  int max_epochs = 2000;
  int batch_size = 64;
  double learning_rate = 1e-4;
  int early_stop_patience = 150;
  int threads = 1;

  /// Throws ConfigError for an unsupported horizon or a model shape that
  /// contradicts ph/modality.
  void validate() const;

  WindowSpec window_spec() const;
  TrainOptions train_options() const;

  nlohmann::json to_json() const;
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig defaults(int ph_minutes, Modality modality);
};

/// (T, L) for a 30- or 60-minute horizon; throws ConfigError otherwise.
std::pair<int, int> lengths_for_horizon(int ph_minutes);
int features_for(Modality m);
Modality parse_modality(const std::string& text);
std::string to_string(Modality m);

}  // namespace seqformer::cli
