#include "seqformer/loss.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "seqformer/errors.hpp"

namespace seqformer {

EventClass classify_event(double g) {
  if (!std::isfinite(g) || g <= 0.0) {
    throw InputError("glucose value must be positive and finite, got " + std::to_string(g));
  }
  if (g < kHypoThreshold) return EventClass::Hypo;
  if (g > kHyperThreshold) return EventClass::Hyper;
  return EventClass::Normal;
}

std::string_view to_string(EventClass c) {
  switch (c) {
    case EventClass::Hypo:
      return "hypo";
    case EventClass::Normal:
      return "normal";
    case EventClass::Hyper:
      return "hyper";
  }
  return "unknown";
}

int severity(EventClass c) {
  switch (c) {
    case EventClass::Hypo:
      return 2;
    case EventClass::Hyper:
      return 1;
    case EventClass::Normal:
      return 0;
  }
  return 0;
}

double EventWeights::for_class(EventClass c) const {
  switch (c) {
    case EventClass::Hypo:
      return hypo;
    case EventClass::Normal:
      return normal;
    case EventClass::Hyper:
      return hyper;
  }
  return normal;
}

EventCounts count_events(std::span<const double> targets) {
  EventCounts counts;
  for (double g : targets) {
    switch (classify_event(g)) {
      case EventClass::Hypo:
        ++counts.hypo;
        break;
      case EventClass::Normal:
        ++counts.normal;
        break;
      case EventClass::Hyper:
        ++counts.hyper;
        break;
    }
  }
  return counts;
}

EventWeights event_weights_from_counts(const EventCounts& counts) {
  const std::size_t total = counts.total();
  if (total == 0) throw InputError("event weights need at least one target point");
  const auto weight = [total](double relevance, std::size_t n) {
    const double freq = static_cast<double>(n) / static_cast<double>(total);
    return std::max(relevance * (1.0 - freq), kMinEventWeight);
  };
  return {weight(kHypoRelevance, counts.hypo), weight(kNormalRelevance, counts.normal),
          weight(kHyperRelevance, counts.hyper)};
}

EventWeights compute_event_weights(std::span<const double> training_targets) {
  if (training_targets.empty()) throw InputError("event weights need at least one target point");
  return event_weights_from_counts(count_events(training_targets));
}

double balanced_mse(std::span<const double> targets, std::span<const double> predictions,
                    const EventWeights& weights, std::span<double> grad) {
  if (targets.size() != predictions.size()) {
    throw ShapeError("balanced_mse: " + std::to_string(targets.size()) + " targets vs " +
                     std::to_string(predictions.size()) + " predictions");
  }
  if (!grad.empty() && grad.size() != targets.size()) {
    throw ShapeError("balanced_mse: gradient buffer has the wrong length");
  }
  double loss = 0.0;
  for (std::size_t i = 0; i < targets.size(); ++i) {
    const double w = weights.for_target(targets[i]);
    const double diff = targets[i] - predictions[i];
    loss += w * diff * diff;
    if (!grad.empty()) grad[i] = -2.0 * w * diff;
  }
  return loss;
}

}  // namespace seqformer
