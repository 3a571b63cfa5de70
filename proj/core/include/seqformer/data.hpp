#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "seqformer/random.hpp"
#include "seqformer/window.hpp"

namespace seqformer {

// --- Records ---------------------------------------------------------------------

/// One CGM row. glucose is empty for an explicit gap.
struct GlucoseRecord {
  std::int64_t minute = 0;  // minutes since 1970-01-01T00:00
  std::optional<double> glucose;
  double carbs = 0.0;
  double bolus = 0.0;
  double basal = 0.0;
  double extra = 0.0;

  friend bool operator==(const GlucoseRecord&, const GlucoseRecord&) = default;
};

inline constexpr std::string_view kRecordHeader = "timestamp,glucose,carbs,bolus,basal,extra";
inline constexpr int kMaxFeatureCount = 5;

/// Parses `YYYY-MM-DDTHH:MM[:SS]` (a space separator is also accepted) into
/// minutes since the Unix epoch. Seconds are truncated.
std::optional<std::int64_t> parse_timestamp(std::string_view text);
std::string format_timestamp(std::int64_t minute);

/// Parses CSV text with header `timestamp,glucose,carbs,bolus,basal,extra`.
/// Throws ParseError (with 1-based line) for malformed rows and DataError for
/// timestamps that are not strictly increasing.
std::vector<GlucoseRecord> parse_records(std::string_view csv);
std::string write_records_csv(std::span<const GlucoseRecord> records);

// --- Grid alignment and windowing ---------------------------------------------------

struct GapPolicy {
  /// Runs of at most this many missing grid points are linearly interpolated.
  int max_interpolated = 2;
};

struct GridPoint {
  double glucose = 0.0;  // NaN marks an unfilled gap
  double carbs = 0.0;
  double bolus = 0.0;
  double basal = 0.0;
  double extra = 0.0;

  bool missing() const;
};

/// Points on the absolute 5-minute grid starting at first_slot (slot = minute / 5).
struct GridSeries {
  std::int64_t first_slot = 0;
  std::vector<GridPoint> points;
};

GridSeries align_to_grid(std::span<const GlucoseRecord> records, GapPolicy policy = {});

struct WindowSpec {
  int observed_len = 24;
  int forecast_len = 6;
  int feature_count = 1;  // 1 = glucose only, 5 = glucose, carbs, bolus, basal, extra
};

/// Stride-1 sliding windows over the grid. Windows touching an unfilled gap are
/// skipped. Features are in raw units (glucose in mg/dL); see FeatureScaler.
std::vector<GlucoseWindow> build_windows(const GridSeries& grid, const WindowSpec& spec);

/// Glucose column: the fixed [40, 400] map. Other columns: min-max fitted on
/// the training partition (a constant column maps to 0).
struct FeatureScaler {
  std::vector<double> min;
  std::vector<double> max;

  static FeatureScaler fit(std::span<const GlucoseWindow> raw_windows, int feature_count);

  double normalize(std::size_t column, double value) const;
  void apply(GlucoseWindow& raw_window) const;
  void apply(std::vector<GlucoseWindow>& raw_windows) const;

  nlohmann::json to_json() const;
  static FeatureScaler from_json(const nlohmann::json& j);

  friend bool operator==(const FeatureScaler&, const FeatureScaler&) = default;
};

// --- Temporal split -------------------------------------------------------------------

struct SplitSpec {
  double train_frac = 0.64;
  double val_frac = 0.16;
  double test_frac = 0.20;
};

struct Partitions {
  std::vector<GlucoseWindow> train;
  std::vector<GlucoseWindow> val;
  std::vector<GlucoseWindow> test;
};

/// Partition sizes before boundary dropping: floor(train_frac n), floor(val_frac n), rest.
struct SplitSizes {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};
SplitSizes split_sizes(std::size_t n, const SplitSpec& spec);

/// Chronological split per subject. Windows of a later partition that share
/// grid points with the last window of the preceding partition are dropped.
Partitions temporal_split(const std::vector<std::vector<GlucoseWindow>>& per_subject,
                          const SplitSpec& spec = {});

// --- SMOTE ----------------------------------------------------------------------------

struct SmoteOptions {
  int k = 5;
  std::uint64_t seed = 0;
  /// Jitter for classes too small for k-NN, as a fraction of each coordinate's range.
  double jitter_fraction = 0.01;
};

struct SyntheticOrigin {
  std::size_t base = 0;      // index into the input
  std::size_t neighbor = 0;  // index into the input; equals base for jittered copies
  double lambda = 0.0;
  bool jittered = false;
};

struct SmoteResult {
  std::vector<GlucoseWindow> windows;    // input windows first, then synthetic ones
  std::vector<SyntheticOrigin> origins;  // origins[i] describes windows[input_size + i]
  std::vector<std::string> warnings;
};

/// Flattened (observed_features, normalized targets) vector used for distances
/// and interpolation.
std::vector<double> smote_flatten(const GlucoseWindow& w);

/// Oversamples minority classes (by event_label) until every non-empty class
/// matches the majority count.
SmoteResult smote_augment(std::span<const GlucoseWindow> train, const SmoteOptions& options);

// --- Synthetic CGM generator -------------------------------------------------------------

struct SubjectRecords {
  std::string id;
  std::vector<GlucoseRecord> records;
};

struct SynthOptions {
  int subjects = 5;
  int days = 8;
  std::uint64_t seed = 0;
};

/// Circadian baseline + meal spikes + insulin dips + sensor noise, clipped to
/// [40, 400] mg/dL, one reading every 5 minutes.
std::vector<SubjectRecords> synth_generate(const SynthOptions& options);

}  // namespace seqformer
