#pragma once

#include <span>
#include <vector>

#include "seqformer/data.hpp"
#include "seqformer/loss.hpp"

namespace seqformer {

/// Normalized, split windows plus the scaler fitted on the training part.
struct PreparedData {
  Partitions parts;
  FeatureScaler scaler;
  std::size_t real_train_count = 0;
};

/// align -> window -> per-subject temporal split -> scaler fit on train -> normalize.
PreparedData prepare_dataset(std::span<const SubjectRecords> subjects, const WindowSpec& spec,
                             const SplitSpec& split = {});

/// Event weights come from the real training windows only, never from SMOTE output.
EventWeights training_event_weights(std::span<const GlucoseWindow> train, std::size_t real_count);

}  // namespace seqformer
