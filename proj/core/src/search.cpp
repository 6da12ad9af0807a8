#include "sif/search.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <limits>
#include <thread>

#include "sif/error.hpp"
#include "sif/prox.hpp"

namespace sif {

namespace {

using Clock = std::chrono::steady_clock;

constexpr std::uint64_t kTransformInitStream = 4;
constexpr std::uint64_t kLookaheadSamplerStream = 5;
constexpr std::uint64_t kRandomSearchStream = 6;

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::vector<std::string> op_names(const Architecture& arch, std::span<const std::size_t> idx) {
  std::vector<std::string> names;
  for (auto i : idx) names.push_back(arch.ops[i].name());
  return names;
}

void require_search_splits(const RatingDataset& dataset) {
  if (!dataset.has_split()) throw ConfigError("dataset must be split before searching");
  if (dataset.split_size(Split::train) == 0) throw ConfigError("training split is empty");
  if (dataset.split_size(Split::validation) == 0) throw ConfigError("validation split is empty");
}

void gradient_step_on_ball(std::optional<ElementTransform>& g, std::span<const double> grad, double lr) {
  if (!g || grad.empty()) return;
  auto th = g->theta();
  for (std::size_t i = 0; i < th.size(); ++i) th[i] -= lr * grad[i];
  project_unit_ball_inplace(th);
}

SearchReport run_search(const RatingDataset& dataset, const SearchConfig& config, std::size_t k,
                        const SearchEpochCallback& on_epoch, const EpochCallback& on_retrain_epoch) {
  require_search_splits(dataset);
  const auto start = Clock::now();
  const auto candidates = resolve_candidates(config, dataset.order());
  const std::size_t d = candidates.size();
  if (k == 0 || k > d) throw ConfigError("top-k must lie in [1, number of candidates]");

  Architecture arch;
  arch.ops = candidates;
  if (config.alpha_init) {
    if (config.alpha_init->size() != d) throw ConfigError("alpha_init length differs from candidate count");
    arch.alpha = *config.alpha_init;
  } else {
    arch.alpha.assign(d, 1.0 / static_cast<double>(d));
  }
  std::mt19937_64 trng(derive_seed(config.seed, kTransformInitStream));
  for (int mode = 0; mode < dataset.order(); ++mode)
    arch.transforms[mode] =
        ElementTransform::random(config.transforms[mode].hidden, config.transforms[mode].activation, trng);

  ModelParams params = init_model(dataset, candidates,
                                  {config.dim, config.predictor, config.mlp_hidden, config.init_std, config.seed});
  auto state = AdagradState::for_params(params, config.lr);
  BatchSampler train_sampler(dataset, Split::train, config.batch_size,
                             derive_seed(config.seed, kTrainSamplerStream));
  BatchSampler val_sampler(dataset, Split::validation, config.batch_size,
                           derive_seed(config.seed, kValidationSamplerStream));
  std::optional<BatchSampler> look_sampler;
  if (config.lookahead)
    look_sampler.emplace(dataset, Split::train, config.batch_size, derive_seed(config.seed, kLookaheadSamplerStream));
  BatchEvaluator eval(params, arch);

  Architecture discrete = arch;
  auto discretize = [&] {
    discrete.alpha = prox_ck(arch.alpha, k);
    discrete.transforms = arch.transforms;
  };

  SearchReport report;
  report.method = k == 1 ? "sif" : "sif-topk";
  ModelParams look_params;
  for (std::size_t epoch = 1; epoch <= config.search_epochs; ++epoch) {
    const auto n_batches = train_sampler.batches_per_epoch();
    double h_sum = 0.0;
    std::size_t h_count = 0;
    for (std::size_t b = 0; b < n_batches; ++b) {
      if (!config.freeze_architecture) {
        discretize();
        const auto vb = val_sampler.next();
        const ModelParams* at = &params;
        if (config.lookahead) {
          // Architecture gradient at T - lr * grad_T F(T, discrete alpha).
          const auto lb = look_sampler->next();
          const auto& lg = eval.run(params, discrete, lb.records, 0.0, {true, false, false});
          look_params = params;
          for (std::size_t mode = 0; mode < lg.model.embeddings.size(); ++mode) {
            const auto& sr = lg.model.embeddings[mode];
            for (std::size_t s = 0; s < sr.rows.size(); ++s) {
              auto row = look_params.embeddings[mode].row(sr.rows[s]);
              const auto g = sr.grad(s);
              for (std::size_t l = 0; l < row.size(); ++l) row[l] -= config.lr * g[l];
            }
          }
          for (std::size_t m = 0; m < lg.model.heads.size(); ++m)
            for (std::size_t i = 0; i < lg.model.heads[m].size(); ++i)
              look_params.heads[m][i] -= config.lr * lg.model.heads[m][i];
          at = &look_params;
        }
        const auto& vg = eval.run(*at, discrete, vb.records, 0.0, {false, true, true});
        if (!std::isfinite(vg.data_loss))
          throw DivergenceError("validation objective became non-finite at search epoch " + std::to_string(epoch));
        h_sum += vg.data_loss;
        ++h_count;
        std::vector<double> stepped(arch.alpha);
        for (std::size_t m = 0; m < d; ++m) stepped[m] -= config.lr * vg.arch.alpha[m];
        arch.alpha = prox_c2(stepped);
        for (int mode = 0; mode < 3; ++mode)
          gradient_step_on_ball(arch.transforms[mode], vg.arch.transforms[mode], config.lr);
      }
      const auto tb = train_sampler.next();
      discretize();
      const auto& tg = eval.run(params, discrete, tb.records, 0.0, {true, false, false});
      if (!std::isfinite(tg.loss))
        throw DivergenceError("training loss became non-finite at search epoch " + std::to_string(epoch));
      adagrad_step(params, tg.model, state);
    }
    discretize();
    SearchEpoch se;
    se.epoch = epoch;
    se.val_objective = h_count ? h_sum / static_cast<double>(h_count) : std::numeric_limits<double>::quiet_NaN();
    se.val_rmse = split_rmse(params, discrete, dataset, Split::validation);
    se.selected = op_names(arch, top_k_support(arch.alpha, k));
    se.alpha = arch.alpha;
    se.seconds = seconds_since(start);
    report.trace.push_back(se);
    if (on_epoch) on_epoch(se);
  }

  const auto extracted = extract_architecture(arch, k);
  report.selected = op_names(arch, extracted.indices);
  report.arch = arch;
  report.selected_arch = extracted.arch;
  report.search_seconds = seconds_since(start);
  report.search_params = params;
  if (config.retrain) report.retrained = retrain_over_grid(dataset, extracted.arch, config, on_retrain_epoch);
  return report;
}

}  // namespace

std::vector<double> default_lambda_grid() { return {0.0, 1e-6, 5e-6, 1e-5, 5e-5, 1e-4}; }

std::vector<Candidate> resolve_candidates(const SearchConfig& config, int order) {
  std::vector<Candidate> out = config.candidates;
  if (out.empty()) {
    if (order == 2) {
      for (auto op : default_search_ops()) out.emplace_back(op);
    } else {
      const OpKind base[] = {OpKind::multiply, OpKind::plus, OpKind::min, OpKind::max};
      for (const auto& t : enumerate_tensor_ops(base)) out.emplace_back(t);
    }
  }
  for (const auto& c : out)
    if (c.arity() != order)
      throw ConfigError("candidate '" + c.name() + "' does not fit " + std::to_string(order) + "-way data");
  return out;
}

Extracted extract_architecture(const Architecture& arch, std::size_t k) {
  Extracted out;
  out.indices = top_k_support(arch.alpha, k);
  out.arch.transforms = arch.transforms;
  for (auto i : out.indices) {
    out.arch.ops.push_back(arch.ops[i]);
    out.arch.alpha.push_back(k == 1 ? 1.0 : arch.alpha[i]);
  }
  // Every kept weight clipped to zero leaves nothing to train; weigh them equally.
  if (std::all_of(out.arch.alpha.begin(), out.arch.alpha.end(), [](double a) { return a == 0.0; }))
    out.arch.alpha.assign(out.arch.alpha.size(), 1.0 / static_cast<double>(k));
  return out;
}

TrainConfig retrain_config(const SearchConfig& config, double lambda) {
  TrainConfig tc;
  tc.dim = config.dim;
  tc.lr = config.lr;
  tc.batch_size = config.batch_size;
  tc.lambda = lambda;
  tc.max_epochs = config.retrain_epochs;
  tc.patience = config.patience;
  tc.init_std = config.init_std;
  tc.predictor = config.predictor;
  tc.mlp_hidden = config.mlp_hidden;
  tc.seed = config.seed;
  tc.track_all_splits = config.track_all_splits;
  tc.learn_transforms = config.relearn_transforms;
  return tc;
}

RetrainOutcome retrain_over_grid(const RatingDataset& dataset, const Architecture& arch, const SearchConfig& config,
                                 const EpochCallback& on_epoch) {
  if (config.lambda_grid.empty()) throw ConfigError("lambda grid is empty");
  for (double l : config.lambda_grid)
    if (!(l >= 0.0)) throw ConfigError("lambda values must be non-negative");
  const auto start = Clock::now();
  const std::size_t n = config.lambda_grid.size();
  std::vector<std::optional<TrainResult>> results(n);

  const std::size_t workers = std::max<std::size_t>(1, std::min(config.threads, n));
  if (workers == 1) {
    for (std::size_t i = 0; i < n; ++i)
      results[i] = train_fixed(dataset, arch, retrain_config(config, config.lambda_grid[i]), on_epoch);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (std::size_t i; (i = next.fetch_add(1)) < n;) {
          try {
            results[i] = train_fixed(dataset, arch, retrain_config(config, config.lambda_grid[i]));
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  RetrainOutcome out;
  std::size_t best = 0;
  for (std::size_t i = 0; i < n; ++i) {
    out.grid.push_back({config.lambda_grid[i], results[i]->best_val_rmse, results[i]->best_epoch, results[i]->seconds});
    if (results[i]->best_val_rmse < results[best]->best_val_rmse) best = i;
  }
  out.lambda = config.lambda_grid[best];
  out.result = std::move(*results[best]);
  out.test = evaluate(out.result.params, out.result.arch, dataset, Split::test, config.cutoffs);
  out.seconds = seconds_since(start);
  return out;
}

SearchReport sif_search(const RatingDataset& dataset, const SearchConfig& config, const SearchEpochCallback& on_epoch,
                        const EpochCallback& on_retrain_epoch) {
  if (config.top_k != 1) return sif_search_topk(dataset, config.top_k, config, on_epoch, on_retrain_epoch);
  return run_search(dataset, config, 1, on_epoch, on_retrain_epoch);
}

SearchReport sif_search_topk(const RatingDataset& dataset, std::size_t k, SearchConfig config,
                             const SearchEpochCallback& on_epoch, const EpochCallback& on_retrain_epoch) {
  config.top_k = k;
  auto report = run_search(dataset, config, k, on_epoch, on_retrain_epoch);
  report.method = "sif-topk";
  return report;
}

SearchReport random_search(const RatingDataset& dataset, std::size_t budget, const SearchConfig& config,
                           const EpochCallback& on_retrain_epoch) {
  if (budget < 1) throw ConfigError("random search budget must be at least 1");
  require_search_splits(dataset);
  const auto start = Clock::now();
  const auto candidates = resolve_candidates(config, dataset.order());
  std::mt19937_64 rng(derive_seed(config.seed, kRandomSearchStream));
  std::uniform_int_distribution<std::size_t> pick(0, candidates.size() - 1);

  SearchReport report;
  report.method = "random";
  std::optional<Architecture> best;
  double best_val = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < budget; ++t) {
    Architecture arch = Architecture::single(candidates[pick(rng)]);
    for (int mode = 0; mode < dataset.order(); ++mode)
      arch.transforms[mode] =
          ElementTransform::uniform(config.transforms[mode].hidden, config.transforms[mode].activation, 3.0, rng);
    auto tc = retrain_config(config, 0.0);
    tc.track_all_splits = false;
    tc.learn_transforms = false;
    double val = std::numeric_limits<double>::infinity();
    try {
      val = train_fixed(dataset, arch, tc).best_val_rmse;
    } catch (const DivergenceError&) {
      // A sampled architecture that diverges simply loses.
    }
    RandomTrial trial;
    trial.op = arch.ops.front().name();
    const auto th = [&](int mode) {
      const auto& g = arch.transforms[mode];
      return g ? std::vector<double>(g->theta().begin(), g->theta().end()) : std::vector<double>{};
    };
    trial.p = th(0);
    trial.q = th(1);
    trial.r = th(2);
    trial.val_rmse = val;
    report.trials.push_back(std::move(trial));
    if (val < best_val || !best) {
      best_val = val;
      best = std::move(arch);
    }
  }
  report.arch = *best;
  report.selected_arch = *best;
  report.selected = {best->ops.front().name()};
  report.search_seconds = seconds_since(start);
  if (config.retrain) report.retrained = retrain_over_grid(dataset, *best, config, on_retrain_epoch);
  return report;
}

SearchReport fixed_operation(const RatingDataset& dataset, Candidate op, const SearchConfig& config,
                             const EpochCallback& on_retrain_epoch) {
  require_search_splits(dataset);
  if (op.arity() != dataset.order()) throw ConfigError("operation '" + op.name() + "' does not fit the data order");
  SearchReport report;
  report.method = "fixed";
  report.arch = Architecture::single(op);
  report.selected_arch = report.arch;
  report.selected = {op.name()};
  if (config.retrain) report.retrained = retrain_over_grid(dataset, report.arch, config, on_retrain_epoch);
  return report;
}

}  // namespace sif
