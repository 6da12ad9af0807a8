#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "sif/dataset.hpp"
#include "sif/ops.hpp"
#include "sif/transform.hpp"

namespace sif {

enum class PredictorMode { linear, mlp };

std::string_view predictor_name(PredictorMode mode);
PredictorMode parse_predictor(std::string_view name);

/// Row-major dense matrix used for embedding tables.
struct Table {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Table() = default;
  Table(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}

  std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
  std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
  double squared_norm() const;

  friend bool operator==(const Table&, const Table&) = default;
};

/// Architecture (the hyper-parameters searched on validation data): candidate
/// operations, their mixture weights, and one element-wise transform per mode.
/// A missing transform means the identity map.
struct Architecture {
  std::vector<Candidate> ops;
  std::vector<double> alpha;
  std::array<std::optional<ElementTransform>, 3> transforms;

  /// Single operation with coefficient 1 and identity transforms.
  static Architecture single(Candidate op);

  std::size_t size() const noexcept { return ops.size(); }
  int arity() const;
};

/// Trainable parameters: embedding tables (one per mode) and one predictor
/// head per candidate operation. Linear heads are the vectors w_m; MLP heads
/// are flattened [W1 (hidden x in) | b1 | w2 | b2] with ReLU hidden units.
struct ModelParams {
  std::size_t dim = 0;
  PredictorMode predictor = PredictorMode::linear;
  std::size_t mlp_hidden = 10;
  std::vector<Table> embeddings;
  std::vector<std::vector<double>> heads;
  std::vector<std::size_t> head_inputs;  ///< output_dim of each head's operation

  friend bool operator==(const ModelParams&, const ModelParams&) = default;
};

struct ModelInit {
  std::size_t dim = 8;
  PredictorMode predictor = PredictorMode::linear;
  std::size_t mlp_hidden = 10;
  double init_std = 0.1;
  std::uint64_t seed = 1;
};

/// Embeddings i.i.d. N(0, init_std^2) drawn mode by mode from `seed`; linear
/// heads start at the constant unit vector; MLP heads use a separate stream.
ModelParams init_model(const RatingDataset& dataset, std::span<const Candidate> ops, const ModelInit& init);

/// Throws ConfigError if the parameter shapes do not fit the architecture.
void check_compatible(const ModelParams& params, const Architecture& arch);

/// Gradient rows touched by one batch.
struct SparseRows {
  std::size_t cols = 0;
  std::vector<std::uint32_t> rows;
  std::vector<double> values;  ///< rows.size() x cols

  std::span<const double> grad(std::size_t slot) const { return {values.data() + slot * cols, cols}; }
};

struct ModelGrads {
  std::vector<SparseRows> embeddings;
  std::vector<std::vector<double>> heads;
};

struct ArchGrads {
  std::vector<double> alpha;
  std::array<std::vector<double>, 3> transforms;
};

struct GradRequest {
  bool model = true;
  bool alpha = false;
  bool transforms = false;
};

struct LossAndGrads {
  double loss = 0.0;       ///< data_loss + regularizer
  double data_loss = 0.0;  ///< mean squared error over the batch
  ModelGrads model;
  ArchGrads arch;
};

double predict(const ModelParams& params, const Architecture& arch, const RatingRecord& index);
std::vector<double> predict_all(const ModelParams& params, const Architecture& arch,
                                std::span<const RatingRecord> records);

/// Mean squared error over the batch plus lambda/2 times the squared norms of
/// the embedding rows the batch touches (each distinct row counted once).
LossAndGrads loss_and_grads(const ModelParams& params, const Architecture& arch, const Batch& batch,
                            double lambda, GradRequest request = {});

/// Reusable evaluator: same semantics as loss_and_grads without per-call
/// allocation. Holds scratch sized for one (params, arch) shape.
class BatchEvaluator {
 public:
  BatchEvaluator(const ModelParams& params, const Architecture& arch);

  const LossAndGrads& run(const ModelParams& params, const Architecture& arch,
                          std::span<const RatingRecord> records, double lambda, GradRequest request);
  double predict(const ModelParams& params, const Architecture& arch, const RatingRecord& r);

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

struct AdagradState {
  double lr = 0.05;
  double eps = 1e-8;
  std::vector<Table> embeddings;
  std::vector<std::vector<double>> heads;

  static AdagradState for_params(const ModelParams& params, double lr);
};

/// x <- x - lr * g / sqrt(G + eps) per coordinate with G the running sum of
/// squared gradients; linear heads are then projected onto the unit ball.
void adagrad_step(ModelParams& params, const ModelGrads& grads, AdagradState& state);

struct TrainConfig {
  std::size_t dim = 8;
  double lr = 0.05;
  std::size_t batch_size = 256;
  double lambda = 0.0;
  std::size_t max_epochs = 200;
  std::size_t patience = 10;
  double init_std = 0.1;
  PredictorMode predictor = PredictorMode::linear;
  std::size_t mlp_hidden = 10;
  std::uint64_t seed = 1;
  /// Also compute train and test RMSE every epoch (validation is always computed).
  bool track_all_splits = true;
  /// Update the element-wise transforms on training batches by projected gradient steps.
  bool learn_transforms = false;
};

struct EpochMetrics {
  std::size_t epoch = 0;
  double seconds = 0.0;  ///< cumulative wall clock
  double train_rmse = 0.0;
  double val_rmse = 0.0;
  double test_rmse = 0.0;
};

struct TrainResult {
  ModelParams params;       ///< parameters at the best validation epoch
  Architecture arch;        ///< architecture used (transforms updated if learned)
  std::vector<EpochMetrics> epochs;
  std::size_t best_epoch = 0;
  double best_val_rmse = 0.0;
  double seconds = 0.0;
};

using EpochCallback = std::function<void(const EpochMetrics&)>;

/// Trains T for a fixed architecture with early stopping on validation RMSE.
/// Throws DivergenceError when the loss becomes non-finite.
TrainResult train_fixed(const RatingDataset& dataset, const Architecture& arch, const TrainConfig& config,
                        const EpochCallback& on_epoch = {});
TrainResult train_fixed(const RatingDataset& dataset, Candidate op, const TrainConfig& config);

double split_rmse(const ModelParams& params, const Architecture& arch, const RatingDataset& dataset, Split split);

/// Derives an independent stream seed from a base seed.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Seeds used by the trainer; exposed so the search loop can share streams.
inline constexpr std::uint64_t kTrainSamplerStream = 1;
inline constexpr std::uint64_t kValidationSamplerStream = 2;
inline constexpr std::uint64_t kHeadInitStream = 3;

}  // namespace sif
