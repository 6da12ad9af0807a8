#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sif/dataset.hpp"
#include "sif/search.hpp"

namespace sif::cli {

/// Everything a run depends on. Persisted verbatim as config.json; loading that
/// file back (plus the split manifest) reproduces the run.
struct RunConfig {
  std::string data;
  std::string format = "auto";  ///< auto | tab | dat | tensor
  std::size_t dim = 8;
  std::string ops;  ///< comma-separated candidates; empty = default set
  std::string mode = "sif";  ///< sif | sif-topk | random | fixed:<op>
  std::size_t topk = 1;
  std::string predictor = "linear";
  std::size_t mlp_hidden = 10;
  double lr = 0.05;
  std::vector<double> lambda_grid = default_lambda_grid();
  std::size_t batch = 256;
  std::size_t search_epochs = 50;
  std::size_t epochs = 200;
  std::size_t patience = 10;
  std::size_t hidden = 5;
  std::string activation = "sigmoid";
  std::size_t random_budget = 20;
  bool lookahead = false;
  bool relearn_transforms = false;
  bool retrain = true;
  double train_ratio = 0.5;
  double val_ratio = 0.25;
  double test_ratio = 0.25;
  std::string split_file;
  std::size_t threads = 1;
  bool save_embeddings = true;
  bool track_all_splits = true;
  std::uint64_t seed = 1;
  std::string out;
};

std::string to_json(const RunConfig& config);
/// Missing keys keep their defaults; unknown keys are rejected.
RunConfig config_from_json(const std::string& text);

/// Throws ConfigError naming the first invalid field. Checks that the data file
/// exists but does not read it.
void validate(const RunConfig& config);

/// Loads the data file and applies either the manifest or a seeded split.
RatingDataset load_and_split(const RunConfig& config);
RatingDataset load_data(const std::string& path, const std::string& format);

SearchConfig to_search_config(const RunConfig& config);

/// `$SIF_OUTPUT_ROOT/<name>` (or `runs/<name>`) unless an explicit directory was given.
std::filesystem::path output_dir(const std::string& explicit_dir, const std::string& name);

}  // namespace sif::cli
