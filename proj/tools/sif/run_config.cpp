#include "run_config.hpp"

#include <cstdlib>
#include <fstream>
#include <set>
#include <string_view>

#include <nlohmann/json.hpp>

#include "sif/error.hpp"

namespace sif::cli {

namespace {

using nlohmann::json;

std::vector<std::string> split_list(std::string_view text) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto comma = text.find(',', start);
    const auto end = comma == std::string_view::npos ? text.size() : comma;
    if (end > start) out.emplace_back(text.substr(start, end - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

template <typename T>
void read_field(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

bool first_line_declares_tensor(const std::string& path) {
  std::ifstream f(path);
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    return line.rfind("# dims", 0) == 0 || line.find(',') != std::string::npos;
  }
  return false;
}

}  // namespace

std::string to_json(const RunConfig& c) {
  json j;
  j["data"] = c.data;
  j["format"] = c.format;
  j["dim"] = c.dim;
  j["ops"] = c.ops;
  j["mode"] = c.mode;
  j["topk"] = c.topk;
  j["predictor"] = c.predictor;
  j["mlp_hidden"] = c.mlp_hidden;
  j["lr"] = c.lr;
  j["lambda_grid"] = c.lambda_grid;
  j["batch"] = c.batch;
  j["search_epochs"] = c.search_epochs;
  j["epochs"] = c.epochs;
  j["patience"] = c.patience;
  j["hidden"] = c.hidden;
  j["activation"] = c.activation;
  j["random_budget"] = c.random_budget;
  j["lookahead"] = c.lookahead;
  j["relearn_transforms"] = c.relearn_transforms;
  j["retrain"] = c.retrain;
  j["train_ratio"] = c.train_ratio;
  j["val_ratio"] = c.val_ratio;
  j["test_ratio"] = c.test_ratio;
  j["split_file"] = c.split_file;
  j["threads"] = c.threads;
  j["save_embeddings"] = c.save_embeddings;
  j["track_all_splits"] = c.track_all_splits;
  j["seed"] = c.seed;
  j["out"] = c.out;
  return j.dump(1);
}

RunConfig config_from_json(const std::string& text) {
  RunConfig c;
  try {
    const auto j = json::parse(text);
    static const std::set<std::string> known = {
        "data", "format", "dim", "ops", "mode", "topk", "predictor", "mlp_hidden", "lr", "lambda_grid",
        "batch", "search_epochs", "epochs", "patience", "hidden", "activation", "random_budget", "lookahead",
        "relearn_transforms", "retrain", "train_ratio", "val_ratio", "test_ratio", "split_file", "threads",
        "save_embeddings", "track_all_splits", "seed", "out"};
    for (const auto& [key, value] : j.items())
      if (!known.contains(key)) throw ConfigError("unknown config key: " + key);
    read_field(j, "data", c.data);
    read_field(j, "format", c.format);
    read_field(j, "dim", c.dim);
    read_field(j, "ops", c.ops);
    read_field(j, "mode", c.mode);
    read_field(j, "topk", c.topk);
    read_field(j, "predictor", c.predictor);
    read_field(j, "mlp_hidden", c.mlp_hidden);
    read_field(j, "lr", c.lr);
    read_field(j, "lambda_grid", c.lambda_grid);
    read_field(j, "batch", c.batch);
    read_field(j, "search_epochs", c.search_epochs);
    read_field(j, "epochs", c.epochs);
    read_field(j, "patience", c.patience);
    read_field(j, "hidden", c.hidden);
    read_field(j, "activation", c.activation);
    read_field(j, "random_budget", c.random_budget);
    read_field(j, "lookahead", c.lookahead);
    read_field(j, "relearn_transforms", c.relearn_transforms);
    read_field(j, "retrain", c.retrain);
    read_field(j, "train_ratio", c.train_ratio);
    read_field(j, "val_ratio", c.val_ratio);
    read_field(j, "test_ratio", c.test_ratio);
    read_field(j, "split_file", c.split_file);
    read_field(j, "threads", c.threads);
    read_field(j, "save_embeddings", c.save_embeddings);
    read_field(j, "track_all_splits", c.track_all_splits);
    read_field(j, "seed", c.seed);
    read_field(j, "out", c.out);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config file: ") + e.what());
  }
  return c;
}

void validate(const RunConfig& c) {
  if (c.data.empty()) throw ConfigError("--data is required");
  if (!std::filesystem::is_regular_file(c.data)) throw ConfigError("data file not found: " + c.data);
  if (c.format != "auto" && c.format != "tensor") parse_matrix_format(c.format);
  if (c.dim == 0) throw ConfigError("--dim must be at least 1");
  for (const auto& name : split_list(c.ops)) parse_candidate(name);
  if (c.mode != "sif" && c.mode != "sif-topk" && c.mode != "random") {
    if (c.mode.rfind("fixed:", 0) != 0) throw ConfigError("unknown --mode: " + c.mode);
    parse_candidate(c.mode.substr(6));
  }
  if (c.topk == 0) throw ConfigError("--topk must be at least 1");
  parse_predictor(c.predictor);
  if (c.mlp_hidden == 0) throw ConfigError("--mlp-hidden must be at least 1");
  if (!(c.lr > 0.0)) throw ConfigError("--lr must be positive");
  if (c.lambda_grid.empty()) throw ConfigError("lambda grid is empty");
  for (double l : c.lambda_grid)
    if (!(l >= 0.0)) throw ConfigError("lambda values must be non-negative");
  if (c.batch == 0) throw ConfigError("--batch must be at least 1");
  if (c.epochs == 0) throw ConfigError("--epochs must be at least 1");
  if (c.hidden == 0) throw ConfigError("--hidden must be at least 1");
  parse_activation(c.activation);
  if (c.mode == "random" && c.random_budget == 0) throw ConfigError("--budget must be at least 1");
  for (double r : {c.train_ratio, c.val_ratio, c.test_ratio})
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("split ratios must lie in [0, 1]");
  if (std::abs(c.train_ratio + c.val_ratio + c.test_ratio - 1.0) > 1e-9)
    throw ConfigError("split ratios must sum to 1");
  if (!c.split_file.empty() && !std::filesystem::is_regular_file(c.split_file))
    throw ConfigError("split manifest not found: " + c.split_file);
  if (c.threads == 0) throw ConfigError("--threads must be at least 1");
}

RatingDataset load_data(const std::string& path, const std::string& format) {
  const bool tensor = format == "tensor" || (format == "auto" && first_line_declares_tensor(path));
  if (tensor) return load_tensor(path);
  return load_matrix(path, parse_matrix_format(format));
}

RatingDataset load_and_split(const RunConfig& c) {
  const auto raw = load_data(c.data, c.format);
  if (!c.split_file.empty()) return apply_split_manifest(c.split_file, raw);
  return split(raw, SplitRatios{c.train_ratio, c.val_ratio, c.test_ratio}, c.seed);
}

SearchConfig to_search_config(const RunConfig& c) {
  SearchConfig s;
  for (const auto& name : split_list(c.ops)) s.candidates.push_back(parse_candidate(name));
  s.dim = c.dim;
  s.lr = c.lr;
  s.batch_size = c.batch;
  s.search_epochs = c.search_epochs;
  for (auto& t : s.transforms) t = TransformSpec{c.hidden, parse_activation(c.activation)};
  s.predictor = parse_predictor(c.predictor);
  s.mlp_hidden = c.mlp_hidden;
  s.top_k = c.mode == "sif-topk" ? c.topk : 1;
  s.lookahead = c.lookahead;
  s.relearn_transforms = c.relearn_transforms;
  s.retrain = c.retrain;
  s.lambda_grid = c.lambda_grid;
  s.retrain_epochs = c.epochs;
  s.patience = c.patience;
  s.track_all_splits = c.track_all_splits;
  s.threads = c.threads;
  s.seed = c.seed;
  return s;
}

std::filesystem::path output_dir(const std::string& explicit_dir, const std::string& name) {
  if (!explicit_dir.empty()) return explicit_dir;
  const char* root = std::getenv("SIF_OUTPUT_ROOT");
  return std::filesystem::path(root && *root ? root : "runs") / name;
}

}  // namespace sif::cli
