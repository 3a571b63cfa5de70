#include <algorithm>
#include <array>
#include <limits>
#include <map>
#include <numeric>
#include <string>

#include "seqformer/data.hpp"
#include "seqformer/errors.hpp"

namespace seqformer {

namespace {

GlucoseWindow unflatten(const std::vector<double>& flat, const GlucoseWindow& like) {
  GlucoseWindow w = like;
  const Index T = like.observed_len();
  const Index F = like.feature_count();
  std::size_t k = 0;
  for (Index t = 0; t < T; ++t) {
    for (Index f = 0; f < F; ++f) w.observed_features(t, f) = flat[k++];
  }
  for (double& g : w.targets) g = denormalize_glucose(flat[k++]);
  return w;
}

double squared_distance(const std::vector<double>& a, const std::vector<double>& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    d += diff * diff;
  }
  return d;
}

}  // namespace

std::vector<double> smote_flatten(const GlucoseWindow& w) {
  std::vector<double> flat;
  flat.reserve(static_cast<std::size_t>(w.observed_features.size()) + w.targets.size());
  for (Index t = 0; t < w.observed_len(); ++t) {
    for (Index f = 0; f < w.feature_count(); ++f) flat.push_back(w.observed_features(t, f));
  }
  for (double g : w.targets) flat.push_back(normalize_glucose(g));
  return flat;
}

SmoteResult smote_augment(std::span<const GlucoseWindow> train, const SmoteOptions& options) {
  if (options.k < 1) throw ConfigError("SMOTE needs k >= 1");
  SmoteResult result;
  result.windows.assign(train.begin(), train.end());
  if (train.empty()) return result;

  std::array<std::vector<std::size_t>, 3> members;
  for (std::size_t i = 0; i < train.size(); ++i) {
    members[static_cast<std::size_t>(train[i].event_label)].push_back(i);
  }
  std::size_t majority = 0;
  for (const auto& m : members) majority = std::max(majority, m.size());

  std::vector<std::vector<double>> flat(train.size());
  for (std::size_t i = 0; i < train.size(); ++i) flat[i] = smote_flatten(train[i]);

  // Per-coordinate range over the whole training set, for the jitter fallback.
  const std::size_t dim = flat.front().size();
  std::vector<double> range(dim, 0.0);
  for (std::size_t d = 0; d < dim; ++d) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    for (const auto& v : flat) {
      lo = std::min(lo, v[d]);
      hi = std::max(hi, v[d]);
    }
    range[d] = hi - lo;
  }

  Rng rng(options.seed);
  const auto k = static_cast<std::size_t>(options.k);
  for (std::size_t cls = 0; cls < 3; ++cls) {
    const auto& group = members[cls];
    const std::string name(to_string(static_cast<EventClass>(cls)));
    if (group.empty()) {
      result.warnings.push_back("class " + name + " has no training windows; not oversampled");
      continue;
    }
    const std::size_t needed = majority - group.size();
    if (needed == 0) continue;

    if (group.size() < k + 1) {
      result.warnings.push_back("class " + name + " has " + std::to_string(group.size()) +
                                " windows (< k+1); oversampling with jittered copies");
      for (std::size_t s = 0; s < needed; ++s) {
        const std::size_t base = group[rng.index(group.size())];
        std::vector<double> v = flat[base];
        for (std::size_t d = 0; d < dim; ++d) v[d] += rng.normal() * options.jitter_fraction * range[d];
        GlucoseWindow w = unflatten(v, train[base]);
        w.event_label = static_cast<EventClass>(cls);
        result.windows.push_back(std::move(w));
        result.origins.push_back({base, base, 0.0, true});
      }
      continue;
    }

    std::map<std::size_t, std::vector<std::size_t>> knn_cache;
    const auto neighbours = [&](std::size_t base) -> const std::vector<std::size_t>& {
      auto it = knn_cache.find(base);
      if (it != knn_cache.end()) return it->second;
      std::vector<std::pair<double, std::size_t>> dist;
      dist.reserve(group.size() - 1);
      for (std::size_t other : group) {
        if (other != base) dist.emplace_back(squared_distance(flat[base], flat[other]), other);
      }
      std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
      std::vector<std::size_t> nn(k);
      for (std::size_t j = 0; j < k; ++j) nn[j] = dist[j].second;
      return knn_cache.emplace(base, std::move(nn)).first->second;
    };

    for (std::size_t s = 0; s < needed; ++s) {
      const std::size_t base = group[rng.index(group.size())];
      const auto& nn = neighbours(base);
      const std::size_t neighbor = nn[rng.index(nn.size())];
      const double lambda = rng.uniform();
      std::vector<double> v(dim);
      for (std::size_t d = 0; d < dim; ++d) {
        v[d] = flat[base][d] + lambda * (flat[neighbor][d] - flat[base][d]);
      }
      GlucoseWindow w = unflatten(v, train[base]);
      w.event_label = static_cast<EventClass>(cls);
      result.windows.push_back(std::move(w));
      result.origins.push_back({base, neighbor, lambda, false});
    }
  }
  return result;
}

}  // namespace seqformer
