#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sif/dataset.hpp"
#include "sif/metrics.hpp"
#include "sif/model.hpp"

namespace sif {

/// The lambda grid used when retraining a selected architecture.
std::vector<double> default_lambda_grid();

struct TransformSpec {
  std::size_t hidden = 5;
  Activation activation = Activation::sigmoid;
};

struct SearchConfig {
  /// Empty: the default op set for matrices, or all composites of
  /// {multiply, plus, min, max} for tensors.
  std::vector<Candidate> candidates;
  std::size_t dim = 8;
  double lr = 0.05;
  std::size_t batch_size = 256;
  std::size_t search_epochs = 50;
  double init_std = 0.1;
  /// Per mode (user, item, depth).
  std::array<TransformSpec, 3> transforms{};
  PredictorMode predictor = PredictorMode::linear;
  std::size_t mlp_hidden = 10;
  /// Number of operations kept (1 = plain SIF).
  std::size_t top_k = 1;
  /// Evaluate the architecture gradient at T - lr * grad_T F (one-step look-ahead).
  bool lookahead = false;
  /// Keep alpha and the transforms fixed; only T is trained.
  bool freeze_architecture = false;
  /// Defaults to 1/d for every entry.
  std::optional<std::vector<double>> alpha_init;
  /// Continue learning the transforms during retraining instead of freezing them.
  bool relearn_transforms = false;

  bool retrain = true;
  std::vector<double> lambda_grid = default_lambda_grid();
  std::size_t retrain_epochs = 200;
  std::size_t patience = 10;
  bool track_all_splits = true;
  /// Worker threads for lambda-grid retraining (results do not depend on it).
  std::size_t threads = 1;
  std::vector<std::size_t> cutoffs{5, 10};

  std::uint64_t seed = 1;
};

/// Candidates used when SearchConfig::candidates is empty.
std::vector<Candidate> resolve_candidates(const SearchConfig& config, int order);

struct SearchEpoch {
  std::size_t epoch = 0;
  double seconds = 0.0;
  double val_objective = 0.0;  ///< mean validation loss H over the epoch's architecture steps
  double val_rmse = 0.0;       ///< full validation split under the current discrete architecture
  std::vector<std::string> selected;
  std::vector<double> alpha;
};

struct GridPoint {
  double lambda = 0.0;
  double val_rmse = 0.0;
  std::size_t best_epoch = 0;
  double seconds = 0.0;
};

struct RetrainOutcome {
  double lambda = 0.0;
  std::vector<GridPoint> grid;
  TrainResult result;  ///< best grid point
  EvalReport test;
  double seconds = 0.0;
};

struct RandomTrial {
  std::string op;
  std::vector<double> p, q, r;
  double val_rmse = 0.0;
};

struct SearchReport {
  std::string method;
  std::vector<std::string> selected;
  Architecture arch;      ///< final continuous alpha and transforms
  Architecture selected_arch;  ///< the extracted architecture that is retrained
  std::vector<SearchEpoch> trace;
  ModelParams search_params;  ///< T at the end of the search loop
  std::vector<RandomTrial> trials;
  double search_seconds = 0.0;
  std::optional<RetrainOutcome> retrained;
};

/// Chosen operations (and the sub-architecture to retrain) from the support
/// of prox_ck(alpha).
struct Extracted {
  std::vector<std::size_t> indices;
  Architecture arch;
};
Extracted extract_architecture(const Architecture& arch, std::size_t k = 1);

using SearchEpochCallback = std::function<void(const SearchEpoch&)>;

/// One-shot search alternating architecture steps on validation batches with
/// Adagrad steps on training batches, then retraining the extracted op.
SearchReport sif_search(const RatingDataset& dataset, const SearchConfig& config,
                        const SearchEpochCallback& on_epoch = {}, const EpochCallback& on_retrain_epoch = {});

/// Same loop with prox onto {||alpha||_0 = k}.
SearchReport sif_search_topk(const RatingDataset& dataset, std::size_t k, SearchConfig config,
                             const SearchEpochCallback& on_epoch = {}, const EpochCallback& on_retrain_epoch = {});

/// Samples `budget` architectures (op uniform, transform weights uniform in
/// [-3, 3]), trains each with lambda = 0, and keeps the best on validation.
SearchReport random_search(const RatingDataset& dataset, std::size_t budget, const SearchConfig& config,
                           const EpochCallback& on_retrain_epoch = {});

/// Baseline: a single operation with identity transforms, retrained over the grid.
SearchReport fixed_operation(const RatingDataset& dataset, Candidate op, const SearchConfig& config,
                             const EpochCallback& on_retrain_epoch = {});

/// Trains `arch` at every grid lambda and keeps the best validation RMSE.
RetrainOutcome retrain_over_grid(const RatingDataset& dataset, const Architecture& arch, const SearchConfig& config,
                                 const EpochCallback& on_epoch = {});

TrainConfig retrain_config(const SearchConfig& config, double lambda);

}  // namespace sif
