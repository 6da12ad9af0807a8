#pragma once

#include <array>
#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>

#include "sif/dataset.hpp"
#include "sif/metrics.hpp"
#include "sif/model.hpp"
#include "sif/search.hpp"

namespace sif {

/// JSON for a trained model: dims, operations, alpha, transforms, heads, and
/// (optionally) the embedding tables. Only models with embeddings can be reloaded.
std::string model_to_json(const ModelParams& params, const Architecture& arch, const RatingDataset& dataset,
                          bool include_embeddings);

struct LoadedModel {
  ModelParams params;
  Architecture arch;
  std::array<std::size_t, 3> dims{0, 0, 1};
  int order = 2;
};

/// Throws ParseError on malformed input or when embeddings are missing.
LoadedModel model_from_json(std::string_view text);

std::string eval_report_to_json(const EvalReport& report);

/// `split,count,rmse,hit@K...,ndcg@K...` for the report's cutoffs.
std::string eval_csv_header(const EvalReport& report);
std::string eval_csv_row(const EvalReport& report);

/// Search report as JSON. `config_json` (already serialised) is embedded verbatim
/// under "config" when non-empty. Timing lives only in keys ending in "seconds".
std::string search_report_to_json(const SearchReport& report, std::string_view config_json = {});

/// Per-epoch rows for both phases:
/// `phase,epoch,seconds,train_rmse,val_rmse,test_rmse,val_objective`.
void write_metrics_csv(const std::filesystem::path& path, const SearchReport& report);

void write_text(const std::filesystem::path& path, std::string_view text);
std::string read_text(const std::filesystem::path& path);

}  // namespace sif
