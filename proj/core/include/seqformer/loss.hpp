#pragma once

#include <cstddef>
#include <span>
#include <string_view>

namespace seqformer {

enum class EventClass { Hypo = 0, Normal = 1, Hyper = 2 };

inline constexpr double kHypoThreshold = 70.0;   // mg/dL, strictly below is Hypo
inline constexpr double kHyperThreshold = 180.0; // mg/dL, strictly above is Hyper

inline constexpr double kHypoRelevance = 3.0;
inline constexpr double kNormalRelevance = 1.0;
inline constexpr double kHyperRelevance = 2.0;
inline constexpr double kMinEventWeight = 0.05;

/// g < 70 -> Hypo, g > 180 -> Hyper, otherwise Normal. Throws InputError for
/// non-finite or non-positive g.
EventClass classify_event(double glucose_mgdl);

std::string_view to_string(EventClass c);

/// Severity order used for window labels: Hypo > Hyper > Normal.
int severity(EventClass c);

struct EventWeights {
  double hypo = 1.0;
  double normal = 1.0;
  double hyper = 1.0;

  double for_class(EventClass c) const;
  double for_target(double glucose_mgdl) const { return for_class(classify_event(glucose_mgdl)); }

  static EventWeights unit() { return {1.0, 1.0, 1.0}; }
};

struct EventCounts {
  std::size_t hypo = 0;
  std::size_t normal = 0;
  std::size_t hyper = 0;

  std::size_t total() const { return hypo + normal + hyper; }
};

EventCounts count_events(std::span<const double> targets_mgdl);

/// w_event = relevance_event * (1 - count_event / total), floored at 0.05.
EventWeights event_weights_from_counts(const EventCounts& counts);

/// Weights from every target point of the training set. Throws InputError on
/// an empty list.
EventWeights compute_event_weights(std::span<const double> training_targets_mgdl);

/// Sum over points of w(target_i) * (target_i - prediction_i)^2, in mg/dL.
/// When grad is non-empty it receives d loss / d prediction_i.
double balanced_mse(std::span<const double> targets_mgdl, std::span<const double> predictions_mgdl,
                    const EventWeights& weights, std::span<double> grad = {});

}  // namespace seqformer
