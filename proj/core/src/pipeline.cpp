#include "seqformer/pipeline.hpp"

#include "seqformer/errors.hpp"

namespace seqformer {

PreparedData prepare_dataset(std::span<const SubjectRecords> subjects, const WindowSpec& spec,
                             const SplitSpec& split) {
  std::vector<std::vector<GlucoseWindow>> per_subject;
  per_subject.reserve(subjects.size());
  for (const SubjectRecords& s : subjects) {
    if (s.records.empty()) continue;
    per_subject.push_back(build_windows(align_to_grid(s.records), spec));
  }

  PreparedData out;
  out.parts = temporal_split(per_subject, split);
  if (out.parts.train.empty()) throw DataError("no training windows; the series is too short");
  out.scaler = FeatureScaler::fit(out.parts.train, spec.feature_count);
  out.scaler.apply(out.parts.train);
  out.scaler.apply(out.parts.val);
  out.scaler.apply(out.parts.test);
  out.real_train_count = out.parts.train.size();
  return out;
}

EventWeights training_event_weights(std::span<const GlucoseWindow> train, std::size_t real_count) {
  if (real_count > train.size()) throw InputError("real_count exceeds the window count");
  std::vector<double> targets;
  for (const GlucoseWindow& w : train.first(real_count))
    targets.insert(targets.end(), w.targets.begin(), w.targets.end());
  return compute_event_weights(targets);
}

}  // namespace seqformer
