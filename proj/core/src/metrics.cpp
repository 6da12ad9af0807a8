#include "sif/metrics.hpp"

#include <algorithm>
#include <cmath>

#include "sif/error.hpp"

namespace sif {

double rmse(std::span<const double> predictions, std::span<const double> targets) {
  if (predictions.size() != targets.size()) throw ConfigError("rmse: length mismatch");
  if (predictions.empty()) throw ConfigError("rmse: empty input");
  double sse = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double e = predictions[i] - targets[i];
    sse += e * e;
  }
  return std::sqrt(sse / static_cast<double>(predictions.size()));
}

RankingMetrics ranking_metrics(std::span<const ScoredItem> items, std::span<const std::size_t> ks) {
  for (auto k : ks)
    if (k == 0) throw ConfigError("ranking cutoff K must be at least 1");

  std::vector<ScoredItem> sorted(items.begin(), items.end());
  std::sort(sorted.begin(), sorted.end(), [](const ScoredItem& a, const ScoredItem& b) {
    if (a.user != b.user) return a.user < b.user;
    if (a.score != b.score) return a.score > b.score;
    return a.item < b.item;
  });

  RankingMetrics out;
  for (auto k : ks) {
    out.hit[k] = 0.0;
    out.ndcg[k] = 0.0;
  }
  for (std::size_t begin = 0; begin < sorted.size();) {
    std::size_t end = begin;
    while (end < sorted.size() && sorted[end].user == sorted[begin].user) ++end;
    std::size_t positives = 0;
    for (std::size_t i = begin; i < end; ++i) positives += sorted[i].rating >= kPositiveRating ? 1 : 0;
    if (positives > 0) {
      ++out.users;
      for (auto k : ks) {
        double dcg = 0.0, ideal = 0.0;
        bool hit = false;
        for (std::size_t rank = 1; rank <= std::min(k, end - begin); ++rank) {
          if (sorted[begin + rank - 1].rating >= kPositiveRating) {
            hit = true;
            dcg += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
          }
        }
        for (std::size_t rank = 1; rank <= std::min(k, positives); ++rank)
          ideal += 1.0 / std::log2(static_cast<double>(rank) + 1.0);
        out.hit[k] += hit ? 1.0 : 0.0;
        out.ndcg[k] += dcg / ideal;
      }
    }
    begin = end;
  }
  if (out.users == 0) throw Error("ranking metrics: no user has a positive item");
  for (auto k : ks) {
    out.hit[k] /= static_cast<double>(out.users);
    out.ndcg[k] /= static_cast<double>(out.users);
  }
  return out;
}

EvalReport evaluate(const ModelParams& params, const Architecture& arch, const RatingDataset& dataset, Split split,
                    std::span<const std::size_t> ks) {
  EvalReport report;
  report.split = split;
  const auto idx = dataset.indices(split);
  if (idx.empty()) throw ConfigError("cannot evaluate an empty split");
  report.count = idx.size();

  BatchEvaluator eval(params, arch);
  std::vector<ScoredItem> scored;
  scored.reserve(idx.size());
  double sse = 0.0;
  bool any_positive = false;
  for (auto i : idx) {
    const auto& r = dataset.record(i);
    const double p = eval.predict(params, arch, r);
    sse += (p - r.value) * (p - r.value);
    scored.push_back({r.row, r.col, p, r.value});
    any_positive = any_positive || r.value >= kPositiveRating;
  }
  report.rmse = std::sqrt(sse / static_cast<double>(idx.size()));
  if (ks.empty()) ks = kDefaultCutoffs;
  if (any_positive) {
    report.ranking = ranking_metrics(scored, ks);
    report.has_ranking = true;
  }
  return report;
}

}  // namespace sif
