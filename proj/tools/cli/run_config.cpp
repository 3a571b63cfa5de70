#include "run_config.hpp"

#include <seqformer/errors.hpp>

namespace seqformer::cli {

std::pair<int, int> lengths_for_horizon(int ph) {
  if (ph == 30) return {24, 6};
  if (ph == 60) return {48, 12};
  throw ConfigError("prediction horizon must be 30 or 60 minutes, got " + std::to_string(ph));
}

int features_for(Modality m) { return m == Modality::Single ? 1 : 5; }

Modality parse_modality(const std::string& text) {
  if (text == "single") return Modality::Single;
  if (text == "multi") return Modality::Multi;
  throw ConfigError("modality must be 'single' or 'multi', got '" + text + "'");
}

std::string to_string(Modality m) { return m == Modality::Single ? "single" : "multi"; }

RunConfig RunConfig::defaults(int ph, Modality modality) {
  RunConfig c;
  c.ph_minutes = ph;
  c.modality = modality;
  const auto [T, L] = lengths_for_horizon(ph);
  c.model.observed_len = T;
  c.model.forecast_len = L;
  c.model.feature_count = features_for(modality);
  return c;
}

void RunConfig::validate() const {
  const auto [T, L] = lengths_for_horizon(ph_minutes);
  const int F = features_for(modality);
  if (model.observed_len != T || model.forecast_len != L || model.feature_count != F) {
    throw ConfigError("model shape (T=" + std::to_string(model.observed_len) +
                      ", L=" + std::to_string(model.forecast_len) +
                      ", F=" + std::to_string(model.feature_count) + ") contradicts ph " +
                      std::to_string(ph_minutes) + " / " + to_string(modality) + " (T=" +
                      std::to_string(T) + ", L=" + std::to_string(L) + ", F=" + std::to_string(F) + ")");
  }
  model.validate();
  if (max_epochs < 1 || batch_size < 1 || early_stop_patience < 1 || threads < 1 ||
      !(learning_rate > 0.0)) {
    throw ConfigError("training settings must be positive");
  }
}

WindowSpec RunConfig::window_spec() const {
  return {model.observed_len, model.forecast_len, model.feature_count};
}

TrainOptions RunConfig::train_options() const {
  TrainOptions o;
  o.max_epochs = max_epochs;
  o.batch_size = batch_size;
  o.learning_rate = learning_rate;
  o.early_stop_patience = early_stop_patience;
  o.seed = seed;
  o.threads = threads;
  return o;
}

nlohmann::json RunConfig::to_json() const {
  return {{"augment", augment},
          {"balanced", balanced},
          {"modality", to_string(modality)},
          {"model", model.to_json()},
          {"ph_min", ph_minutes},
          {"seed", seed},
          {"train",
           {{"batch_size", batch_size},
            {"early_stop_patience", early_stop_patience},
            {"learning_rate", learning_rate},
            {"max_epochs", max_epochs},
            {"threads", threads}}}};
}

RunConfig RunConfig::from_json(const nlohmann::json& j) {
  RunConfig c = defaults(j.value("ph_min", 30), parse_modality(j.value("modality", std::string("single"))));
  c.balanced = j.value("balanced", c.balanced);
  c.augment = j.value("augment", c.augment);
  c.seed = j.value("seed", c.seed);
  if (j.contains("model")) {
    // Shape keys may be omitted; they default to what ph/modality imply.
    nlohmann::json m = c.model.to_json();
    m.update(j.at("model"));
    c.model = ModelConfig::from_json(m);
  }
  if (j.contains("train")) {
    const auto& t = j.at("train");
    c.max_epochs = t.value("max_epochs", c.max_epochs);
    c.batch_size = t.value("batch_size", c.batch_size);
    c.learning_rate = t.value("learning_rate", c.learning_rate);
    c.early_stop_patience = t.value("early_stop_patience", c.early_stop_patience);
    c.threads = t.value("threads", c.threads);
  }
  c.validate();
  return c;
}

}  // namespace seqformer::cli
