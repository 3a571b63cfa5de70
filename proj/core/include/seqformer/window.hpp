#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "seqformer/loss.hpp"
#include "seqformer/tensor.hpp"

namespace seqformer {

inline constexpr double kGlucoseFloor = 40.0;
inline constexpr double kGlucoseCeiling = 400.0;
inline constexpr int kGridMinutes = 5;
inline constexpr double kMinutesPerDay = 1440.0;

/// Fixed affine map [40, 400] mg/dL -> [0, 1].
inline double normalize_glucose(double mgdl) {
  return (mgdl - kGlucoseFloor) / (kGlucoseCeiling - kGlucoseFloor);
}
inline double denormalize_glucose(double unit) {
  return kGlucoseFloor + unit * (kGlucoseCeiling - kGlucoseFloor);
}

/// One sample: T observed steps and L targets on the 5-minute grid.
struct GlucoseWindow {
  Matrix observed_features;                 // T x F, column 0 is glucose
  std::vector<double> observed_daytimes;    // minutes since midnight
  std::vector<double> targets;              // mg/dL
  std::vector<double> target_daytimes;      // minutes since midnight
  EventClass event_label = EventClass::Normal;
  std::int64_t start_slot = 0;              // grid index of the first observed step; not serialized

  Index observed_len() const { return observed_features.rows(); }
  Index feature_count() const { return observed_features.cols(); }
  Index forecast_len() const { return static_cast<Index>(targets.size()); }

  friend bool operator==(const GlucoseWindow& a, const GlucoseWindow& b) {
    return a.observed_features == b.observed_features &&
           a.observed_daytimes == b.observed_daytimes && a.targets == b.targets &&
           a.target_daytimes == b.target_daytimes && a.event_label == b.event_label;
  }
};

/// Most severe class among targets (Hypo > Hyper > Normal).
EventClass window_label(std::span<const double> targets_mgdl);

}  // namespace seqformer
