#include <algorithm>
#include <set>

#include "seqformer/errors.hpp"
#include "seqformer/metrics.hpp"

namespace seqformer {

namespace {

// Min-max score in [0, 1], 1 = best.
std::vector<double> column_scores(const std::vector<double>& column, bool lower_is_better) {
  const auto [lo_it, hi_it] = std::minmax_element(column.begin(), column.end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  std::vector<double> scores(column.size(), 0.5);
  if (hi == lo) return scores;
  for (std::size_t i = 0; i < column.size(); ++i) {
    const double s = (column[i] - lo) / (hi - lo);
    scores[i] = lower_is_better ? 1.0 - s : s;
  }
  return scores;
}

}  // namespace

std::vector<RankedModel> rank_models(std::span<const RankingRow> rows) {
  if (rows.size() < 2) throw InputError("rank_models: need at least two rows");

  std::set<int> horizons;
  for (const auto& [ph, m] : rows.front().horizons) horizons.insert(ph);
  if (horizons.empty()) throw InputError("rank_models: rows carry no horizons");
  for (const RankingRow& row : rows) {
    std::set<int> mine;
    for (const auto& [ph, m] : row.horizons) mine.insert(ph);
    if (mine != horizons) {
      throw InputError("rank_models: model '" + row.name + "' does not cover the same horizons");
    }
  }
  const bool with_params =
      std::all_of(rows.begin(), rows.end(), [](const RankingRow& r) { return r.params.has_value(); });

  const std::size_t n = rows.size();
  std::vector<double> horizon_score(n, 0.0);
  for (int ph : horizons) {
    std::vector<double> rmse(n), tg(n), hyper(n), hypo(n);
    for (std::size_t i = 0; i < n; ++i) {
      const HorizonMetrics& m = rows[i].horizons.at(ph);
      rmse[i] = m.rmse;
      tg[i] = m.tg;
      hyper[i] = m.hyper_sen;
      hypo[i] = m.hypo_sen;
    }
    const auto s_rmse = column_scores(rmse, true);
    const auto s_tg = column_scores(tg, false);
    const auto s_hyper = column_scores(hyper, false);
    const auto s_hypo = column_scores(hypo, false);
    for (std::size_t i = 0; i < n; ++i) {
      horizon_score[i] += (s_rmse[i] + s_tg[i] + s_hyper[i] + s_hypo[i]) / 4.0;
    }
  }
  for (double& s : horizon_score) s /= static_cast<double>(horizons.size());

  std::vector<double> total = horizon_score;
  if (with_params) {
    std::vector<double> params(n);
    for (std::size_t i = 0; i < n; ++i) params[i] = *rows[i].params;
    const auto s_params = column_scores(params, true);
    for (std::size_t i = 0; i < n; ++i) total[i] = (horizon_score[i] + s_params[i]) / 2.0;
  }

  std::vector<RankedModel> ranked(n);
  for (std::size_t i = 0; i < n; ++i) ranked[i] = {rows[i].name, total[i], 0};
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const RankedModel& a, const RankedModel& b) { return a.score > b.score; });
  for (std::size_t i = 0; i < n; ++i) {
    ranked[i].rank = (i > 0 && ranked[i].score == ranked[i - 1].score) ? ranked[i - 1].rank
                                                                       : static_cast<int>(i) + 1;
  }
  return ranked;
}

}  // namespace seqformer
