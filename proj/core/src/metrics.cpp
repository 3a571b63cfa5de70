#include "seqformer/metrics.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "seqformer/errors.hpp"

namespace seqformer {

namespace {

void require_pairs(std::span<const double> a, std::span<const double> b, const char* what) {
  if (a.size() != b.size()) {
    throw InputError(std::string(what) + ": " + std::to_string(a.size()) + " targets vs " +
                     std::to_string(b.size()) + " predictions");
  }
  if (a.empty()) throw InputError(std::string(what) + ": empty input");
}

nlohmann::json optional_number(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> read_optional(const nlohmann::json& j, const char* key) {
  const auto& v = j.at(key);
  if (v.is_null()) return std::nullopt;
  return v.get<double>();
}

}  // namespace

char to_char(EgaZone z) { return static_cast<char>('A' + static_cast<int>(z)); }

double rmse(std::span<const double> targets, std::span<const double> predictions) {
  require_pairs(targets, predictions, "rmse");
  double sum = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double d = targets[i] - predictions[i];
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(targets.size()));
}

EgaZone clarke_zone(double ref, double pred) {
  if (!(ref > 0.0) || !(pred > 0.0) || !std::isfinite(ref) || !std::isfinite(pred)) {
    throw InputError("clarke_zone: reference and prediction must be positive");
  }
  // Ratios are multiplied out so integer-valued inputs compare exactly.
  if ((pred <= 70.0 && ref <= 70.0) || (5.0 * pred >= 4.0 * ref && 5.0 * pred <= 6.0 * ref)) {
    return EgaZone::A;
  }
  if ((ref >= 180.0 && pred <= 70.0) || (ref <= 70.0 && pred >= 180.0)) return EgaZone::E;
  if ((ref >= 70.0 && ref <= 290.0 && pred >= ref + 110.0) ||
      (ref >= 130.0 && ref <= 180.0 && 5.0 * pred <= 7.0 * ref - 910.0)) {
    return EgaZone::C;
  }
  if ((ref >= 240.0 && pred >= 70.0 && pred <= 180.0) ||
      (3.0 * ref <= 175.0 && pred >= 70.0 && pred <= 180.0) ||
      (3.0 * ref >= 175.0 && ref <= 70.0 && 5.0 * pred >= 6.0 * ref)) {
    return EgaZone::D;
  }
  return EgaZone::B;
}

std::array<double, 5> ega_percentages(std::span<const double> refs, std::span<const double> preds) {
  require_pairs(refs, preds, "ega_percentages");
  std::array<std::size_t, 5> counts{};
  for (std::size_t i = 0; i < refs.size(); ++i) {
    ++counts[static_cast<std::size_t>(clarke_zone(refs[i], preds[i]))];
  }
  std::array<double, 5> pct{};
  const double total = static_cast<double>(refs.size());
  for (std::size_t z = 0; z < 5; ++z) pct[z] = 100.0 * static_cast<double>(counts[z]) / total;
  return pct;
}

std::optional<double> event_sensitivity(std::span<const double> targets,
                                        std::span<const double> predictions, EventClass which) {
  if (targets.size() != predictions.size()) {
    throw InputError("event_sensitivity: length mismatch");
  }
  std::size_t tp = 0;
  std::size_t fn = 0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    if (classify_event(targets[i]) != which) continue;
    // Predictions outside the classifier's domain count as misses.
    const bool hit = predictions[i] > 0.0 && std::isfinite(predictions[i]) &&
                     classify_event(predictions[i]) == which;
    (hit ? tp : fn) += 1;
  }
  if (tp + fn == 0) return std::nullopt;
  return 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fn);
}

int time_gain(std::span<const double> targets, std::span<const double> predictions, int ph_minutes) {
  if (targets.size() != predictions.size()) throw InputError("time_gain: length mismatch");
  const AlignedSeries s{{targets.begin(), targets.end()}, {predictions.begin(), predictions.end()}};
  const auto min_len = static_cast<std::size_t>(ph_minutes / kGridMinutes + 2);
  if (s.targets.size() < min_len) {
    throw InputError("time_gain: series needs at least " + std::to_string(min_len) + " points");
  }
  return time_gain(std::span<const AlignedSeries>(&s, 1), ph_minutes);
}

int time_gain(std::span<const AlignedSeries> segments, int ph_minutes) {
  if (ph_minutes < 0 || ph_minutes % kGridMinutes != 0) {
    throw InputError("time_gain: ph must be a non-negative multiple of 5 minutes");
  }
  const auto max_lag = static_cast<std::size_t>(ph_minutes / kGridMinutes);
  const std::size_t min_len = max_lag + 2;

  bool any = false;
  double best = std::numeric_limits<double>::infinity();
  std::size_t best_lag = 0;
  for (std::size_t lag = 0; lag <= max_lag; ++lag) {
    double sum = 0.0;
    std::size_t n = 0;
    for (const AlignedSeries& s : segments) {
      if (s.targets.size() != s.predictions.size()) throw InputError("time_gain: length mismatch");
      if (s.targets.size() < min_len) continue;
      any = true;
      // prediction at j against target at j - lag
      for (std::size_t j = lag; j < s.targets.size(); ++j) {
        const double d = s.predictions[j] - s.targets[j - lag];
        sum += d * d;
        ++n;
      }
    }
    if (n == 0) continue;
    const double mse = sum / static_cast<double>(n);
    if (mse < best) {
      best = mse;
      best_lag = lag;
    }
  }
  if (!any) {
    throw InputError("time_gain: no series with at least " + std::to_string(min_len) + " points");
  }
  return ph_minutes - static_cast<int>(best_lag) * kGridMinutes;
}

nlohmann::json MetricsReport::to_json() const {
  return nlohmann::json{
      {"rmse_mgdl", rmse_mgdl},
      {"tg_min", tg_min},
      {"hyper_sen_pct", optional_number(hyper_sen_pct)},
      {"hypo_sen_pct", optional_number(hypo_sen_pct)},
      {"ega_pct",
       {{"a", ega_pct[0]}, {"b", ega_pct[1]}, {"c", ega_pct[2]}, {"d", ega_pct[3]}, {"e", ega_pct[4]}}},
      {"params", params},
      {"ph_min", ph_min}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.rmse_mgdl = j.at("rmse_mgdl").get<double>();
  r.tg_min = j.at("tg_min").get<int>();
  r.hyper_sen_pct = read_optional(j, "hyper_sen_pct");
  r.hypo_sen_pct = read_optional(j, "hypo_sen_pct");
  const auto& ega = j.at("ega_pct");
  const char* keys[] = {"a", "b", "c", "d", "e"};
  for (std::size_t z = 0; z < 5; ++z) r.ega_pct[z] = ega.at(keys[z]).get<double>();
  r.params = j.at("params").get<std::uint64_t>();
  r.ph_min = j.at("ph_min").get<int>();
  return r;
}

std::vector<AlignedSeries> final_horizon_series(std::span<const GlucoseWindow> windows,
                                                const Matrix& preds) {
  if (static_cast<Index>(windows.size()) != preds.rows()) {
    throw ShapeError("final_horizon_series: one prediction row per window required");
  }
  std::vector<AlignedSeries> segments;
  const auto consecutive = [](const GlucoseWindow& a, const GlucoseWindow& b) {
    const Index T = a.observed_len();
    if (b.observed_len() != T || b.feature_count() != a.feature_count()) return false;
    const double expected = std::fmod(a.observed_daytimes.front() + kGridMinutes, kMinutesPerDay);
    if (b.observed_daytimes.front() != expected) return false;
    if (T > 1 && a.observed_features.bottomRows(T - 1) != b.observed_features.topRows(T - 1)) {
      return false;
    }
    return true;
  };
  for (std::size_t i = 0; i < windows.size(); ++i) {
    if (i == 0 || !consecutive(windows[i - 1], windows[i])) segments.emplace_back();
    const Index last = preds.cols() - 1;
    segments.back().targets.push_back(windows[i].targets.back());
    segments.back().predictions.push_back(preds(static_cast<Index>(i), last));
  }
  return segments;
}

MetricsReport evaluate_forecasts(std::span<const GlucoseWindow> windows, const Matrix& preds,
                                 std::uint64_t param_count) {
  if (windows.empty()) throw InputError("evaluate_forecasts: no windows");
  const Index L = windows.front().forecast_len();
  if (preds.rows() != static_cast<Index>(windows.size()) || preds.cols() != L) {
    throw ShapeError("evaluate_forecasts: predictions must be windows x L");
  }
  std::vector<double> targets;
  std::vector<double> flat;
  targets.reserve(windows.size() * static_cast<std::size_t>(L));
  flat.reserve(targets.capacity());
  for (std::size_t i = 0; i < windows.size(); ++i) {
    for (Index j = 0; j < L; ++j) {
      targets.push_back(windows[i].targets[static_cast<std::size_t>(j)]);
      flat.push_back(preds(static_cast<Index>(i), j));
    }
  }
  // Clarke zones are only defined for positive values.
  std::vector<double> clamped(flat);
  for (double& p : clamped) p = std::max(p, 1.0);

  MetricsReport r;
  r.ph_min = static_cast<int>(L) * kGridMinutes;
  r.rmse_mgdl = rmse(targets, flat);
  r.hyper_sen_pct = event_sensitivity(targets, flat, EventClass::Hyper);
  r.hypo_sen_pct = event_sensitivity(targets, flat, EventClass::Hypo);
  r.ega_pct = ega_percentages(targets, clamped);
  r.tg_min = time_gain(final_horizon_series(windows, preds), r.ph_min);
  r.params = param_count;
  return r;
}

}  // namespace seqformer
