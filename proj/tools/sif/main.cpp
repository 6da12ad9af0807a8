#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "run_config.hpp"
#include "sif/error.hpp"
#include "sif/metrics.hpp"
#include "sif/report.hpp"
#include "sif/search.hpp"
#include "sif/synthetic.hpp"

namespace fs = std::filesystem;
using namespace sif;
using sif::cli::RunConfig;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadConfig = 1;
constexpr int kExitRuntime = 2;

template <typename T>
std::vector<T> parse_numbers(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::istringstream is(item);
    T v{};
    if (!(is >> v) || !is.eof()) throw ConfigError(std::string("bad value in ") + what + ": " + item);
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError(std::string(what) + " is empty");
  return out;
}

std::vector<std::string> parse_names(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

void add_run_flags(CLI::App* app, RunConfig& c, std::string& lambda_grid) {
  app->add_option("--config", "Load a config.json snapshot; other flags override it");
  app->add_option("--data", c.data, "Ratings file (u.data, ratings.dat, or tensor quads)");
  app->add_option("--format", c.format, "auto | tab | dat | tensor");
  app->add_option("--dim", c.dim, "Embedding dimension");
  app->add_option("--ops", c.ops, "Comma-separated candidate operations");
  app->add_option("--mode", c.mode, "sif | sif-topk | random | fixed:<op>");
  app->add_option("--topk", c.topk, "Operations kept by sif-topk");
  app->add_option("--predictor", c.predictor, "linear | mlp");
  app->add_option("--mlp-hidden", c.mlp_hidden, "Hidden units of the MLP predictor");
  app->add_option("--lr", c.lr, "Step size for every update");
  app->add_option("--lambda", lambda_grid, "Single lambda or comma-separated grid");
  app->add_option("--batch", c.batch, "Mini-batch size");
  app->add_option("--search-epochs", c.search_epochs, "Epochs of the search loop");
  app->add_option("--epochs", c.epochs, "Maximum retraining epochs");
  app->add_option("--patience", c.patience, "Early-stopping patience in epochs");
  app->add_option("--hidden", c.hidden, "Hidden units of each element-wise transform");
  app->add_option("--activation", c.activation, "sigmoid | relu | tanh");
  app->add_option("--budget", c.random_budget, "Trials for random search");
  app->add_flag("--lookahead", c.lookahead, "Architecture gradient at a one-step look-ahead of T");
  app->add_flag("--relearn-transforms", c.relearn_transforms, "Keep learning transforms while retraining");
  app->add_flag("!--no-retrain", c.retrain, "Stop after the search phase");
  app->add_option("--train-ratio", c.train_ratio);
  app->add_option("--val-ratio", c.val_ratio);
  app->add_option("--test-ratio", c.test_ratio);
  app->add_option("--split-file", c.split_file, "Reuse a split manifest instead of splitting by seed");
  app->add_option("--threads", c.threads, "Workers for lambda-grid retraining");
  app->add_flag("!--no-embeddings", c.save_embeddings, "Omit embedding tables from model.json");
  app->add_flag("!--fast", c.track_all_splits, "Skip per-epoch train/test RMSE");
  app->add_option("--seed", c.seed);
  app->add_option("--out", c.out, "Run directory (default $SIF_OUTPUT_ROOT/<name>)");
}

/// Applies --config before the remaining flags are bound, so explicit flags win.
RunConfig preload_config(int argc, char** argv) {
  for (int i = 1; i + 1 < argc; ++i) {
    const std::string a = argv[i];
    if (a == "--config") return cli::config_from_json(read_text(argv[i + 1]));
  }
  for (int i = 1; i < argc; ++i) {
    const std::string a = argv[i];
    if (a.rfind("--config=", 0) == 0) return cli::config_from_json(read_text(a.substr(9)));
  }
  return {};
}

void finish_config(RunConfig& c, const std::string& lambda_grid) {
  if (!lambda_grid.empty()) c.lambda_grid = parse_numbers<double>(lambda_grid, "--lambda");
  cli::validate(c);
}

SearchReport run_mode(const RatingDataset& data, const RunConfig& c, const SearchConfig& sc, bool verbose) {
  SearchEpochCallback on_search;
  EpochCallback on_train;
  if (verbose) {
    on_search = [](const SearchEpoch& e) {
      std::fprintf(stderr, "search %3zu  H %.5f  val %.5f  %s\n", e.epoch, e.val_objective, e.val_rmse,
                   e.selected.empty() ? "" : e.selected.front().c_str());
    };
    on_train = [](const EpochMetrics& e) {
      std::fprintf(stderr, "train  %3zu  val %.5f  test %.5f\n", e.epoch, e.val_rmse, e.test_rmse);
    };
  }
  if (c.mode == "sif") return sif_search(data, sc, on_search, on_train);
  if (c.mode == "sif-topk") return sif_search_topk(data, c.topk, sc, on_search, on_train);
  if (c.mode == "random") return random_search(data, c.random_budget, sc, on_train);
  return fixed_operation(data, parse_candidate(c.mode.substr(6)), sc, on_train);
}

std::string run_name(const RunConfig& c) {
  std::string mode = c.mode;
  for (auto& ch : mode)
    if (ch == ':') ch = '-';
  return "search-" + mode + "-d" + std::to_string(c.dim) + "-s" + std::to_string(c.seed);
}

int cmd_search(const RunConfig& c, bool verbose) {
  const fs::path dir = cli::output_dir(c.out, run_name(c));
  fs::create_directories(dir);
  write_text(dir / "config.json", cli::to_json(c));

  const auto data = cli::load_and_split(c);
  write_split_manifest(dir / "split.csv", data);
  if (data.id_maps()[0].size() > 0) write_id_maps(dir / "id_map.csv", data);

  const auto report = run_mode(data, c, cli::to_search_config(c), verbose);
  write_text(dir / "report.json", search_report_to_json(report, cli::to_json(c)));
  write_metrics_csv(dir / "metrics.csv", report);
  if (report.retrained) {
    const auto& r = *report.retrained;
    write_text(dir / "model.json", model_to_json(r.result.params, r.result.arch, data, c.save_embeddings));
    std::cout << "selected " << report.selected.front();
    for (std::size_t i = 1; i < report.selected.size(); ++i) std::cout << ',' << report.selected[i];
    std::cout << "  lambda " << r.lambda << "  test rmse " << r.test.rmse << "\n";
  }
  std::cout << "run directory " << dir.string() << "\n";
  return kExitOk;
}

struct EvalArgs {
  std::string run, model, data, format = "auto", split_file, split = "test", out;
  bool csv = false;
};

int cmd_evaluate(EvalArgs a) {
  if (!a.run.empty()) {
    const fs::path run = a.run;
    const auto cfg = cli::config_from_json(read_text(run / "config.json"));
    if (a.model.empty()) a.model = (run / "model.json").string();
    if (a.data.empty()) {
      a.data = cfg.data;
      a.format = cfg.format;
    }
    if (a.split_file.empty()) a.split_file = (run / "split.csv").string();
  }
  if (a.model.empty() || a.data.empty() || a.split_file.empty())
    throw ConfigError("evaluate needs --run, or --model, --data and --split-file");
  const auto which = parse_split(a.split);
  for (const auto& p : {a.model, a.data, a.split_file})
    if (!fs::is_regular_file(p)) throw ConfigError("file not found: " + p);

  const auto model = model_from_json(read_text(a.model));
  const auto data = apply_split_manifest(a.split_file, cli::load_data(a.data, a.format));
  if (data.order() != model.order || data.dims() != model.dims)
    throw ConfigError("model dimensions do not match the data file");
  const auto report = evaluate(model.params, model.arch, data, which);
  const std::string text =
      a.csv ? eval_csv_header(report) + "\n" + eval_csv_row(report) + "\n" : eval_report_to_json(report) + "\n";
  if (a.out.empty())
    std::cout << text;
  else
    write_text(a.out, text);
  return kExitOk;
}

struct AblateArgs {
  std::string ablation;
  std::string seeds = "1,2,3";
  std::string dims;
  std::string hiddens = "1,5,10,15,20";
  std::string activations = "relu,sigmoid,tanh";
  std::string ks = "1,2,3,4,5";
  bool with_sif = true;
};

struct AblationRow {
  std::string setting;
  std::size_t dim;
  std::uint64_t seed;
  SearchReport report;
};

void write_row(std::ostream& os, const std::string& ablation, const AblationRow& row) {
  const auto& r = *row.report.retrained;
  std::string selected;
  for (const auto& s : row.report.selected) selected += (selected.empty() ? "" : "+") + s;
  auto ranking = [&](const std::map<std::size_t, double>& m) {
    const auto it = m.find(5);
    return it == m.end() ? std::string() : std::to_string(it->second);
  };
  os << ablation << ',' << row.setting << ',' << row.dim << ',' << row.seed << ',' << row.report.method << ','
     << selected << ',' << r.lambda << ',' << r.result.best_val_rmse << ',' << r.test.rmse << ','
     << ranking(r.test.ranking.hit) << ',' << ranking(r.test.ranking.ndcg) << ','
     << row.report.search_seconds + r.seconds << '\n';
  os.flush();
}

int cmd_ablate(const RunConfig& base, const AblateArgs& a, bool verbose) {
  const auto seeds = parse_numbers<std::uint64_t>(a.seeds, "--seeds");
  const auto dims = a.dims.empty() ? std::vector<std::size_t>{} : parse_numbers<std::size_t>(a.dims, "--dims");
  std::vector<std::pair<std::string, RunConfig>> settings;

  if (a.ablation == "element-mlp") {
    const auto hs = parse_numbers<std::size_t>(a.hiddens, "--hiddens");
    for (const auto& act : parse_names(a.activations)) {
      parse_activation(act);
      for (auto h : hs) {
        RunConfig c = base;
        c.mode = "sif";
        c.hidden = h;
        c.activation = act;
        settings.emplace_back(act + "-h" + std::to_string(h), c);
      }
    }
  } else if (a.ablation == "predictor") {
    for (auto d : dims.empty() ? std::vector<std::size_t>{2, 4, 8, 16} : dims)
      for (const char* p : {"mlp", "linear"}) {
        RunConfig c = base;
        c.mode = "sif";
        c.dim = d;
        c.predictor = p;
        settings.emplace_back(p, c);
      }
  } else if (a.ablation == "topk") {
    for (auto k : parse_numbers<std::size_t>(a.ks, "--ks")) {
      RunConfig c = base;
      c.mode = k == 1 ? "sif" : "sif-topk";
      c.topk = k;
      settings.emplace_back("k" + std::to_string(k), c);
    }
  } else if (a.ablation == "single-ops") {
    std::vector<std::string> ops = parse_names(base.ops);
    if (ops.empty())
      for (auto op : default_search_ops()) ops.emplace_back(op_name(op));
    for (auto d : dims.empty() ? std::vector<std::size_t>{base.dim} : dims) {
      for (const auto& op : ops) {
        RunConfig c = base;
        c.mode = "fixed:" + op;
        c.dim = d;
        settings.emplace_back(op, c);
      }
      if (a.with_sif) {
        RunConfig c = base;
        c.mode = "sif";
        c.dim = d;
        settings.emplace_back("sif", c);
      }
    }
  } else {
    throw ConfigError("unknown --ablation: " + a.ablation + " (element-mlp | predictor | topk | single-ops)");
  }
  for (const auto& [name, c] : settings) cli::validate(c);

  const fs::path dir = cli::output_dir(base.out, "ablate-" + a.ablation);
  fs::create_directories(dir);
  write_text(dir / "config.json", cli::to_json(base));
  std::ofstream table(dir / "ablation.csv");
  if (!table) throw Error("cannot write " + (dir / "ablation.csv").string());
  table << "ablation,setting,dim,seed,method,selected,lambda,val_rmse,test_rmse,hit@5,ndcg@5,seconds\n";

  const auto raw = cli::load_data(base.data, base.format);
  for (auto seed : seeds) {
    const auto data = base.split_file.empty()
                          ? split(raw, SplitRatios{base.train_ratio, base.val_ratio, base.test_ratio}, seed)
                          : apply_split_manifest(base.split_file, raw);
    for (const auto& [name, c0] : settings) {
      RunConfig c = c0;
      c.seed = seed;
      AblationRow row{name, c.dim, seed, run_mode(data, c, cli::to_search_config(c), verbose)};
      write_row(table, a.ablation, row);
      if (verbose) std::fprintf(stderr, "%s %s seed %llu done\n", a.ablation.c_str(), name.c_str(),
                                static_cast<unsigned long long>(seed));
    }
  }
  std::cout << "table " << (dir / "ablation.csv").string() << "\n";
  return kExitOk;
}

struct SynthArgs {
  std::string kind = "matrix";
  std::string op = "inner";
  std::string dims = "50,40";
  std::size_t dim = 2;
  std::size_t count = 0;
  double density = 0.05;
  double noise = 0.0;
  double embedding_mean = 0.0;
  double embedding_std = 1.0;
  std::uint64_t seed = 1;
  std::string out;
};

int cmd_gen_synthetic(const SynthArgs& a) {
  if (a.kind != "matrix" && a.kind != "tensor") throw ConfigError("--kind must be matrix or tensor");
  if (a.out.empty()) throw ConfigError("--out is required");
  SyntheticSpec spec;
  spec.op = parse_candidate(a.op);
  if ((a.kind == "tensor") != spec.op.is_tensor())
    throw ConfigError(a.kind == "tensor" ? "tensor data needs a composite op such as max_multiply"
                                         : "matrix data needs a single op");
  const auto dims = parse_numbers<std::size_t>(a.dims, "--dims");
  const std::size_t want = a.kind == "tensor" ? 3 : 2;
  if (dims.size() != want) throw ConfigError("--dims needs " + std::to_string(want) + " values");
  spec.dims = {dims[0], dims[1], want == 3 ? dims[2] : 1};
  spec.dim = a.dim;
  spec.count = a.count;
  spec.density = a.density;
  spec.noise = a.noise;
  spec.embedding_mean = a.embedding_mean;
  spec.embedding_std = a.embedding_std;
  spec.seed = a.seed;

  const auto data = generate_synthetic(spec);
  const fs::path out = a.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_dataset_file(out, data.dataset);
  const fs::path truth = out.string() + ".truth.json";
  write_truth_file(truth, spec, data);
  std::cout << "wrote " << data.dataset.size() << " entries to " << out.string() << " (noise floor "
            << data.noise_rms << ", truth " << truth.string() << ")\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Search, train and evaluate interaction functions for collaborative filtering"};
  app.require_subcommand(1);
  app.fallthrough();
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "Per-epoch progress on stderr");

  RunConfig config;
  try {
    config = preload_config(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadConfig;
  }
  std::string lambda_grid;

  auto* search = app.add_subcommand("search", "Split, search, retrain over the lambda grid, evaluate");
  add_run_flags(search, config, lambda_grid);

  EvalArgs eval_args;
  auto* evaluate_cmd = app.add_subcommand("evaluate", "Evaluate a saved model on one split");
  evaluate_cmd->add_option("--run", eval_args.run, "Run directory (supplies model, data and split)");
  evaluate_cmd->add_option("--model", eval_args.model);
  evaluate_cmd->add_option("--data", eval_args.data);
  evaluate_cmd->add_option("--format", eval_args.format);
  evaluate_cmd->add_option("--split-file", eval_args.split_file);
  evaluate_cmd->add_option("--split", eval_args.split, "train | validation | test");
  evaluate_cmd->add_flag("--csv", eval_args.csv, "Emit a CSV header and row instead of JSON");
  evaluate_cmd->add_option("--out", eval_args.out);

  AblateArgs ablate_args;
  auto* ablate = app.add_subcommand("ablate", "Sweep one axis and assemble a CSV table");
  add_run_flags(ablate, config, lambda_grid);
  ablate->add_option("--ablation", ablate_args.ablation, "element-mlp | predictor | topk | single-ops")->required();
  ablate->add_option("--seeds", ablate_args.seeds);
  ablate->add_option("--dims", ablate_args.dims);
  ablate->add_option("--hiddens", ablate_args.hiddens);
  ablate->add_option("--activations", ablate_args.activations);
  ablate->add_option("--ks", ablate_args.ks);
  ablate->add_flag("!--no-sif", ablate_args.with_sif, "single-ops: skip the SIF row");

  SynthArgs synth;
  auto* gen = app.add_subcommand("gen-synthetic", "Write data generated by a known interaction");
  gen->add_option("--kind", synth.kind, "matrix | tensor");
  gen->add_option("--op", synth.op, "Generating op (tensor: inner_outer, e.g. max_multiply)");
  gen->add_option("--dims", synth.dims, "Mode sizes, e.g. 50,40 or 30,20,10");
  gen->add_option("--dim", synth.dim, "Embedding dimension");
  gen->add_option("--count", synth.count, "Observed entries (overrides --density)");
  gen->add_option("--density", synth.density);
  gen->add_option("--noise", synth.noise, "Gaussian noise standard deviation");
  gen->add_option("--embedding-mean", synth.embedding_mean, "Mean of the generating embeddings");
  gen->add_option("--embedding-std", synth.embedding_std, "Standard deviation of the generating embeddings");
  gen->add_option("--seed", synth.seed);
  gen->add_option("--out", synth.out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadConfig;
  }

  try {
    if (*search) {
      finish_config(config, lambda_grid);
      return cmd_search(config, verbose);
    }
    if (*evaluate_cmd) return cmd_evaluate(eval_args);
    if (*ablate) {
      finish_config(config, lambda_grid);
      return cmd_ablate(config, ablate_args, verbose);
    }
    if (*gen) return cmd_gen_synthetic(synth);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const ParseError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitBadConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
