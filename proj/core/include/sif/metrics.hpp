#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <vector>

#include "sif/dataset.hpp"
#include "sif/model.hpp"

namespace sif {

/// Root mean squared error. Throws ConfigError on empty or mismatched input.
double rmse(std::span<const double> predictions, std::span<const double> targets);

/// One scored (user, item) pair with its observed rating.
struct ScoredItem {
  std::uint32_t user = 0;
  std::uint32_t item = 0;
  double score = 0.0;
  double rating = 0.0;
};

struct RankingMetrics {
  std::map<std::size_t, double> hit;
  std::map<std::size_t, double> ndcg;
  std::size_t users = 0;  ///< users with at least one positive item
};

/// Ratings at or above this value count as positives.
inline constexpr double kPositiveRating = 5.0;

/// Per user, ranks that user's items by score (descending, ties by item index)
/// and averages Hit@K and binary-gain NDCG@K over users having a positive.
/// Throws Error when no user qualifies.
RankingMetrics ranking_metrics(std::span<const ScoredItem> items, std::span<const std::size_t> ks);

struct EvalReport {
  Split split = Split::test;
  std::size_t count = 0;
  double rmse = 0.0;
  RankingMetrics ranking;
  bool has_ranking = false;
};

/// RMSE on the split plus ranking metrics over each user's items in it
/// (ranking is skipped, not an error, when no user has a positive).
EvalReport evaluate(const ModelParams& params, const Architecture& arch, const RatingDataset& dataset, Split split,
                    std::span<const std::size_t> ks = std::span<const std::size_t>{});

/// Default cutoffs reported with every evaluation.
inline constexpr std::size_t kDefaultCutoffs[] = {5, 10};

}  // namespace sif
