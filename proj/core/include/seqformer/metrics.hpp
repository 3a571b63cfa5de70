#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqformer/loss.hpp"
#include "seqformer/window.hpp"

namespace seqformer {

enum class EgaZone { A = 0, B = 1, C = 2, D = 3, E = 4 };

char to_char(EgaZone z);

/// Root mean square error over all points. Throws InputError on empty or
/// mismatched input.
double rmse(std::span<const double> targets, std::span<const double> predictions);

/// Clarke error grid zone for one (reference, prediction) pair, both > 0.
EgaZone clarke_zone(double reference, double prediction);

/// Zone percentages A..E; sums to 100.
std::array<double, 5> ega_percentages(std::span<const double> references,
                                      std::span<const double> predictions);

/// Point-wise detection sensitivity for Hypo or Hyper, in percent. Empty when
/// no target point belongs to the class.
std::optional<double> event_sensitivity(std::span<const double> targets,
                                        std::span<const double> predictions, EventClass which);

/// A stretch of consecutive 5-minute samples of the final-horizon channel:
/// prediction[j] is the forecast for the instant of target[j].
struct AlignedSeries {
  std::vector<double> targets;
  std::vector<double> predictions;
};

/// Lag-scan time gain: ph - argmin_tau MSE(pred(t), target(t - tau)),
/// tau in {0, 5, ..., ph}, ties toward smaller tau.
int time_gain(std::span<const double> targets, std::span<const double> predictions, int ph_minutes);

/// Same lag scan with squared errors pooled across several stretches. Stretches
/// shorter than ph/5 + 2 points are ignored; throws InputError if none remain.
int time_gain(std::span<const AlignedSeries> segments, int ph_minutes);

struct MetricsReport {
  double rmse_mgdl = 0.0;
  int tg_min = 0;
  std::optional<double> hyper_sen_pct;
  std::optional<double> hypo_sen_pct;
  std::array<double, 5> ega_pct{};
  std::uint64_t params = 0;
  int ph_min = 30;

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);

  friend bool operator==(const MetricsReport&, const MetricsReport&) = default;
};

/// Splits consecutive windows into stretches of the final forecast step. Two
/// windows are consecutive when the second is the first shifted by one grid
/// step (same observed data, daytime + 5 min).
std::vector<AlignedSeries> final_horizon_series(std::span<const GlucoseWindow> windows,
                                                const Matrix& predictions_mgdl);

/// Full metric suite over a test partition. predictions_mgdl is windows x L.
MetricsReport evaluate_forecasts(std::span<const GlucoseWindow> windows,
                                 const Matrix& predictions_mgdl, std::uint64_t param_count);

// --- Ranking -------------------------------------------------------------------------

struct HorizonMetrics {
  double rmse = 0.0;
  double tg = 0.0;
  double hyper_sen = 0.0;
  double hypo_sen = 0.0;
};

struct RankingRow {
  std::string name;
  std::map<int, HorizonMetrics> horizons;  // keyed by PH minutes
  std::optional<double> params;            // omit for metric-only ranking
};

struct RankedModel {
  std::string name;
  double score = 0.0;
  int rank = 0;
};

/// Min-max scores per column (1 = best), averaged per horizon, then across
/// horizons; when every row has params, combined with the params score as
/// mean(horizon score, params score). Sorted by rank; tied scores share the
/// better rank. A constant column scores 0.5 everywhere.
std::vector<RankedModel> rank_models(std::span<const RankingRow> rows);

}  // namespace seqformer
