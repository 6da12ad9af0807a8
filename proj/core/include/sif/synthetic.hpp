#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "sif/dataset.hpp"
#include "sif/model.hpp"
#include "sif/ops.hpp"

namespace sif {

/// Ratings generated from known embeddings and a known interaction:
/// y = w^T op(u_i, v_j[, s_l]) + N(0, noise^2), with embeddings drawn
/// N(embedding_mean, embedding_std^2) and w the constant unit vector.
struct SyntheticSpec {
  Candidate op = OpKind::inner;
  std::array<std::size_t, 3> dims{50, 40, 1};
  std::size_t dim = 2;
  /// Observed cells, sampled uniformly without replacement. 0 = use density.
  std::size_t count = 0;
  double density = 0.05;
  double noise = 0.0;
  double embedding_mean = 0.0;
  double embedding_std = 1.0;
  std::uint64_t seed = 1;
};

struct SyntheticData {
  RatingDataset dataset;
  std::vector<Table> embeddings;
  std::vector<double> w;
  /// Root mean square of the noise actually added: the RMSE of the true model.
  double noise_rms = 0.0;
};

SyntheticData generate_synthetic(const SyntheticSpec& spec);

/// Matrix data as `user \t item \t rating \t 0`; tensor data as comma-separated
/// quads with a leading "# dims" line.
void write_dataset_file(const std::filesystem::path& path, const RatingDataset& dataset);

/// Ground-truth sidecar (JSON): generator settings, w, noise floor, embeddings.
void write_truth_file(const std::filesystem::path& path, const SyntheticSpec& spec, const SyntheticData& data);

}  // namespace sif
