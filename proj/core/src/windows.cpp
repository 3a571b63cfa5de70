#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "seqformer/data.hpp"
#include "seqformer/errors.hpp"

namespace seqformer {

namespace {

std::int64_t floor_div(std::int64_t a, std::int64_t b) {
  std::int64_t q = a / b;
  if ((a % b != 0) && ((a < 0) != (b < 0))) --q;
  return q;
}

double minute_of_day(std::int64_t slot) {
  const std::int64_t m = slot * kGridMinutes;
  const std::int64_t r = m - floor_div(m, 1440) * 1440;
  return static_cast<double>(r);
}

}  // namespace

EventClass window_label(std::span<const double> targets) {
  EventClass label = EventClass::Normal;
  for (double g : targets) {
    const EventClass c = classify_event(g);
    if (severity(c) > severity(label)) label = c;
  }
  return label;
}

bool GridPoint::missing() const { return std::isnan(glucose); }

GridSeries align_to_grid(std::span<const GlucoseRecord> records, GapPolicy policy) {
  GridSeries grid;
  if (records.empty()) return grid;

  // Nearest grid slot; readings between two slots round up.
  const auto slot_of = [](std::int64_t minute) {
    return floor_div(2 * minute + kGridMinutes, 2 * kGridMinutes);
  };
  grid.first_slot = slot_of(records.front().minute);
  const std::int64_t last_slot = slot_of(records.back().minute);
  const auto n = static_cast<std::size_t>(last_slot - grid.first_slot + 1);

  constexpr double nan = std::numeric_limits<double>::quiet_NaN();
  grid.points.assign(n, GridPoint{nan, 0.0, 0.0, 0.0, 0.0});
  std::vector<bool> seen(n, false);
  for (const GlucoseRecord& r : records) {
    const auto i = static_cast<std::size_t>(slot_of(r.minute) - grid.first_slot);
    GridPoint& p = grid.points[i];
    if (r.glucose) p.glucose = *r.glucose;
    p.carbs += r.carbs;
    p.bolus += r.bolus;
    p.basal = r.basal;
    p.extra = r.extra;
    seen[i] = true;
  }
  // Rate-like channels carry forward into slots that had no record at all.
  for (std::size_t i = 1; i < n; ++i) {
    if (!seen[i]) {
      grid.points[i].basal = grid.points[i - 1].basal;
      grid.points[i].extra = grid.points[i - 1].extra;
    }
  }

  // Interpolate short interior gaps.
  std::size_t i = 0;
  while (i < n) {
    if (!grid.points[i].missing()) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < n && grid.points[j].missing()) ++j;
    const std::size_t run = j - i;
    if (i > 0 && j < n && run <= static_cast<std::size_t>(std::max(policy.max_interpolated, 0))) {
      const double g0 = grid.points[i - 1].glucose;
      const double g1 = grid.points[j].glucose;
      for (std::size_t k = i; k < j; ++k) {
        const double frac = static_cast<double>(k - i + 1) / static_cast<double>(run + 1);
        grid.points[k].glucose = g0 + frac * (g1 - g0);
      }
    }
    i = j;
  }
  return grid;
}

std::vector<GlucoseWindow> build_windows(const GridSeries& grid, const WindowSpec& spec) {
  if (spec.observed_len < 1 || spec.forecast_len < 1) {
    throw ConfigError("window lengths must be positive");
  }
  if (spec.feature_count < 1 || spec.feature_count > kMaxFeatureCount) {
    throw ConfigError("feature_count must be between 1 and " + std::to_string(kMaxFeatureCount));
  }
  const auto T = static_cast<std::size_t>(spec.observed_len);
  const auto L = static_cast<std::size_t>(spec.forecast_len);
  const std::size_t span_len = T + L;
  const std::size_t n = grid.points.size();
  std::vector<GlucoseWindow> windows;
  if (n < span_len) return windows;

  // missing_prefix[i] = number of unfilled points in [0, i).
  std::vector<std::size_t> missing_prefix(n + 1, 0);
  for (std::size_t i = 0; i < n; ++i) {
    missing_prefix[i + 1] = missing_prefix[i] + (grid.points[i].missing() ? 1 : 0);
  }

  const Index F = spec.feature_count;
  for (std::size_t s = 0; s + span_len <= n; ++s) {
    if (missing_prefix[s + span_len] != missing_prefix[s]) continue;
    GlucoseWindow w;
    w.start_slot = grid.first_slot + static_cast<std::int64_t>(s);
    w.observed_features.resize(static_cast<Index>(T), F);
    w.observed_daytimes.resize(T);
    for (std::size_t t = 0; t < T; ++t) {
      const GridPoint& p = grid.points[s + t];
      const double row[kMaxFeatureCount] = {p.glucose, p.carbs, p.bolus, p.basal, p.extra};
      for (Index f = 0; f < F; ++f) w.observed_features(static_cast<Index>(t), f) = row[f];
      w.observed_daytimes[t] = minute_of_day(w.start_slot + static_cast<std::int64_t>(t));
    }
    w.targets.resize(L);
    w.target_daytimes.resize(L);
    for (std::size_t i = 0; i < L; ++i) {
      w.targets[i] = grid.points[s + T + i].glucose;
      w.target_daytimes[i] = minute_of_day(w.start_slot + static_cast<std::int64_t>(T + i));
    }
    w.event_label = window_label(w.targets);
    windows.push_back(std::move(w));
  }
  return windows;
}

// --- FeatureScaler -----------------------------------------------------------------

FeatureScaler FeatureScaler::fit(std::span<const GlucoseWindow> raw_windows, int feature_count) {
  FeatureScaler s;
  const auto F = static_cast<std::size_t>(feature_count);
  s.min.assign(F, std::numeric_limits<double>::infinity());
  s.max.assign(F, -std::numeric_limits<double>::infinity());
  for (const GlucoseWindow& w : raw_windows) {
    if (static_cast<std::size_t>(w.feature_count()) != F) {
      throw ShapeError("FeatureScaler::fit: window feature count mismatch");
    }
    for (Index t = 0; t < w.observed_len(); ++t) {
      for (std::size_t f = 1; f < F; ++f) {
        const double v = w.observed_features(t, static_cast<Index>(f));
        s.min[f] = std::min(s.min[f], v);
        s.max[f] = std::max(s.max[f], v);
      }
    }
  }
  s.min[0] = kGlucoseFloor;
  s.max[0] = kGlucoseCeiling;
  for (std::size_t f = 1; f < F; ++f) {
    if (!std::isfinite(s.min[f])) s.min[f] = s.max[f] = 0.0;
  }
  return s;
}

double FeatureScaler::normalize(std::size_t column, double value) const {
  if (column == 0) return normalize_glucose(value);
  const double range = max.at(column) - min.at(column);
  if (range <= 0.0) return 0.0;
  return (value - min[column]) / range;
}

void FeatureScaler::apply(GlucoseWindow& w) const {
  if (static_cast<std::size_t>(w.feature_count()) != min.size()) {
    throw ShapeError("FeatureScaler::apply: window has " + std::to_string(w.feature_count()) +
                     " features, scaler has " + std::to_string(min.size()));
  }
  for (Index t = 0; t < w.observed_len(); ++t) {
    for (Index f = 0; f < w.feature_count(); ++f) {
      w.observed_features(t, f) = normalize(static_cast<std::size_t>(f), w.observed_features(t, f));
    }
  }
}

void FeatureScaler::apply(std::vector<GlucoseWindow>& raw_windows) const {
  for (GlucoseWindow& w : raw_windows) apply(w);
}

nlohmann::json FeatureScaler::to_json() const { return {{"max", max}, {"min", min}}; }

FeatureScaler FeatureScaler::from_json(const nlohmann::json& j) {
  FeatureScaler s;
  s.min = j.at("min").get<std::vector<double>>();
  s.max = j.at("max").get<std::vector<double>>();
  if (s.min.size() != s.max.size() || s.min.empty()) {
    throw FormatError("feature scaling: min/max arrays must be non-empty and of equal length");
  }
  return s;
}

// --- Temporal split --------------------------------------------------------------------

SplitSizes split_sizes(std::size_t n, const SplitSpec& spec) {
  const double total = spec.train_frac + spec.val_frac + spec.test_frac;
  if (std::abs(total - 1.0) > 1e-9 || spec.train_frac < 0 || spec.val_frac < 0 || spec.test_frac < 0) {
    throw ConfigError("split fractions must be non-negative and sum to 1");
  }
  // The epsilon absorbs representation error in products like 0.64 * 25.
  const auto count = [n](double frac) {
    return static_cast<std::size_t>(std::floor(frac * static_cast<double>(n) + 1e-9));
  };
  SplitSizes s;
  s.train = std::min(count(spec.train_frac), n);
  s.val = std::min(count(spec.val_frac), n - s.train);
  s.test = n - s.train - s.val;
  return s;
}

Partitions temporal_split(const std::vector<std::vector<GlucoseWindow>>& per_subject,
                          const SplitSpec& spec) {
  Partitions out;
  for (const auto& windows : per_subject) {
    const SplitSizes sizes = split_sizes(windows.size(), spec);
    std::vector<GlucoseWindow>* targets[] = {&out.train, &out.val, &out.test};
    const std::size_t bounds[] = {sizes.train, sizes.train + sizes.val, windows.size()};

    std::size_t begin = 0;
    std::int64_t frontier = std::numeric_limits<std::int64_t>::min();
    for (std::size_t part = 0; part < 3; ++part) {
      std::int64_t part_frontier = frontier;
      for (std::size_t i = begin; i < bounds[part]; ++i) {
        const GlucoseWindow& w = windows[i];
        if (w.start_slot < frontier) continue;  // shares grid points with an earlier partition
        const std::int64_t end = w.start_slot + w.observed_len() + w.forecast_len();
        part_frontier = std::max(part_frontier, end);
        targets[part]->push_back(w);
      }
      frontier = part_frontier;
      begin = bounds[part];
    }
  }
  return out;
}

}  // namespace seqformer
