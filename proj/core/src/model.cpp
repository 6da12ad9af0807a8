#include "sif/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numeric>

#include "sif/error.hpp"
#include "sif/prox.hpp"

namespace sif {

std::string_view predictor_name(PredictorMode mode) { return mode == PredictorMode::linear ? "linear" : "mlp"; }

PredictorMode parse_predictor(std::string_view name) {
  if (name == "linear") return PredictorMode::linear;
  if (name == "mlp") return PredictorMode::mlp;
  throw ConfigError("unknown predictor '" + std::string(name) + "'");
}

double Table::squared_norm() const {
  double s = 0.0;
  for (double x : data) s += x * x;
  return s;
}

Architecture Architecture::single(Candidate op) { return Architecture{{op}, {1.0}, {}}; }

int Architecture::arity() const {
  if (ops.empty()) throw ConfigError("architecture has no operations");
  const int a = ops.front().arity();
  for (const auto& op : ops)
    if (op.arity() != a) throw ConfigError("architecture mixes matrix and tensor operations");
  return a;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  // splitmix64 finalizer over the combined value
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

namespace {

std::uint64_t name_hash(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::size_t mlp_param_count(std::size_t in, std::size_t hidden) { return hidden * in + 2 * hidden + 1; }

std::size_t mode_index(const RatingRecord& r, int mode) {
  return mode == 0 ? r.row : mode == 1 ? r.col : r.depth;
}

}  // namespace

ModelParams init_model(const RatingDataset& dataset, std::span<const Candidate> ops, const ModelInit& init) {
  if (init.dim == 0) throw ConfigError("embedding dimension must be at least 1");
  if (ops.empty()) throw ConfigError("model needs at least one operation");
  const int arity = ops.front().arity();
  if (arity != dataset.order())
    throw ConfigError("operation arity " + std::to_string(arity) + " does not match data order " +
                      std::to_string(dataset.order()));

  ModelParams p;
  p.dim = init.dim;
  p.predictor = init.predictor;
  p.mlp_hidden = init.mlp_hidden;
  std::mt19937_64 rng(init.seed);
  std::normal_distribution<double> normal(0.0, init.init_std);
  for (int m = 0; m < arity; ++m) {
    Table t(dataset.dim(m), init.dim);
    for (auto& x : t.data) x = normal(rng);
    p.embeddings.push_back(std::move(t));
  }
  const auto head_seed = derive_seed(init.seed, kHeadInitStream);
  for (const auto& op : ops) {
    const std::size_t in = op.output_dim(init.dim);
    p.head_inputs.push_back(in);
    if (init.predictor == PredictorMode::linear) {
      p.heads.emplace_back(in, 1.0 / std::sqrt(static_cast<double>(in)));
    } else {
      // Seeded per operation name so a head does not depend on its position.
      std::mt19937_64 hrng(derive_seed(head_seed, name_hash(op.name())));
      const std::size_t h = init.mlp_hidden;
      std::vector<double> theta(mlp_param_count(in, h), 0.0);
      std::normal_distribution<double> w1(0.0, 1.0 / std::sqrt(static_cast<double>(in)));
      std::normal_distribution<double> w2(0.0, 1.0 / std::sqrt(static_cast<double>(h)));
      for (std::size_t i = 0; i < h * in; ++i) theta[i] = w1(hrng);
      for (std::size_t j = 0; j < h; ++j) theta[h * in + h + j] = w2(hrng);
      p.heads.push_back(std::move(theta));
    }
  }
  return p;
}

void check_compatible(const ModelParams& params, const Architecture& arch) {
  const int arity = arch.arity();
  if (arch.alpha.size() != arch.ops.size()) throw ConfigError("alpha length differs from operation count");
  if (params.heads.size() != arch.ops.size()) throw ConfigError("model heads do not match architecture operations");
  if (static_cast<int>(params.embeddings.size()) != arity)
    throw ConfigError("model has " + std::to_string(params.embeddings.size()) + " embedding tables, architecture needs " +
                      std::to_string(arity));
  for (std::size_t m = 0; m < arch.ops.size(); ++m) {
    const auto in = arch.ops[m].output_dim(params.dim);
    const auto want = params.predictor == PredictorMode::linear ? in : mlp_param_count(in, params.mlp_hidden);
    if (params.head_inputs[m] != in || params.heads[m].size() != want)
      throw ConfigError("head " + std::to_string(m) + " has the wrong size for '" + arch.ops[m].name() + "'");
  }
  for (const auto& e : params.embeddings)
    if (e.cols != params.dim) throw ConfigError("embedding width differs from model dimension");
}

struct BatchEvaluator::Impl {
  std::size_t k = 0;
  int arity = 2;
  std::size_t n_ops = 0;

  std::array<std::span<const double>, 3> raw;
  std::array<std::vector<double>, 3> t;      // transformed embeddings
  std::array<std::vector<double>, 3> slope;  // dg/dx per coordinate
  std::array<std::vector<double>, 3> gt;     // dL/d(transformed)
  std::array<std::vector<double>, 3> tmp;    // adjoint scratch

  std::vector<std::vector<double>> out;   // per-op output
  std::vector<std::vector<double>> mid;   // tensor inner result
  std::vector<std::vector<double>> dout;  // per-op upstream
  std::vector<std::vector<double>> dmid;
  std::vector<std::vector<double>> hidden;  // MLP pre-activations
  std::vector<double> h;                    // per-op head value

  std::array<std::vector<std::int32_t>, 3> slot;
  LossAndGrads result;

  Impl(const ModelParams& params, const Architecture& arch) {
    check_compatible(params, arch);
    k = params.dim;
    arity = arch.arity();
    n_ops = arch.ops.size();
    for (int m = 0; m < 3; ++m) {
      t[m].assign(k, 0.0);
      slope[m].assign(k, 1.0);
      gt[m].assign(k, 0.0);
      tmp[m].assign(k, 0.0);
    }
    for (std::size_t m = 0; m < n_ops; ++m) {
      const auto d = arch.ops[m].output_dim(k);
      out.emplace_back(d, 0.0);
      dout.emplace_back(d, 0.0);
      mid.emplace_back(k, 0.0);
      dmid.emplace_back(k, 0.0);
      hidden.emplace_back(params.mlp_hidden, 0.0);
    }
    h.assign(n_ops, 0.0);
    result.model.embeddings.resize(static_cast<std::size_t>(arity));
    for (int m = 0; m < arity; ++m) {
      slot[m].assign(params.embeddings[m].rows, -1);
      result.model.embeddings[m].cols = k;
    }
    result.model.heads.resize(n_ops);
    result.arch.alpha.assign(n_ops, 0.0);
  }

  double head_forward(const ModelParams& params, std::size_t m) {
    const auto& w = params.heads[m];
    const auto& o = out[m];
    const std::size_t in = o.size();
    if (params.predictor == PredictorMode::linear) {
      double acc = 0.0;
      for (std::size_t i = 0; i < in; ++i) acc += w[i] * o[i];
      return acc;
    }
    const std::size_t H = params.mlp_hidden;
    const double* W1 = w.data();
    const double* b1 = W1 + H * in;
    const double* w2 = b1 + H;
    double acc = w2[H];  // b2
    for (std::size_t j = 0; j < H; ++j) {
      double z = b1[j];
      for (std::size_t i = 0; i < in; ++i) z += W1[j * in + i] * o[i];
      hidden[m][j] = z;
      if (z > 0.0) acc += w2[j] * z;
    }
    return acc;
  }

  // Accumulates head parameter grads (when `grad` is non-null) and writes dout[m].
  void head_backward(const ModelParams& params, std::size_t m, double dh, std::vector<double>* grad) {
    const auto& w = params.heads[m];
    const auto& o = out[m];
    auto& d = dout[m];
    const std::size_t in = o.size();
    if (params.predictor == PredictorMode::linear) {
      for (std::size_t i = 0; i < in; ++i) {
        d[i] = dh * w[i];
        if (grad) (*grad)[i] += dh * o[i];
      }
      return;
    }
    const std::size_t H = params.mlp_hidden;
    const double* W1 = w.data();
    const double* w2 = W1 + H * in + H;
    std::fill(d.begin(), d.end(), 0.0);
    double* g = grad ? grad->data() : nullptr;
    for (std::size_t j = 0; j < H; ++j) {
      const double z = hidden[m][j];
      if (g) g[H * in + H + j] += dh * (z > 0.0 ? z : 0.0);
      if (z <= 0.0) continue;
      const double dz = dh * w2[j];
      for (std::size_t i = 0; i < in; ++i) {
        d[i] += dz * W1[j * in + i];
        if (g) g[j * in + i] += dz * o[i];
      }
      if (g) g[H * in + j] += dz;
    }
    if (g) g[H * in + 2 * H] += dh;
  }

  void op_forward(const Candidate& op, std::size_t m) {
    if (op.is_tensor()) {
      const auto top = op.tensor_op();
      apply(top.inner, t[0], t[1], mid[m]);
      apply(top.outer, mid[m], t[2], out[m]);
    } else {
      apply(op.op(), t[0], t[1], out[m]);
    }
  }

  void op_backward(const Candidate& op, std::size_t m) {
    if (op.is_tensor()) {
      const auto top = op.tensor_op();
      apply_adjoint(top.outer, mid[m], t[2], dout[m], dmid[m], tmp[2]);
      for (std::size_t l = 0; l < k; ++l) gt[2][l] += tmp[2][l];
      apply_adjoint(top.inner, t[0], t[1], dmid[m], tmp[0], tmp[1]);
    } else {
      apply_adjoint(op.op(), t[0], t[1], dout[m], tmp[0], tmp[1]);
    }
    for (std::size_t l = 0; l < k; ++l) {
      gt[0][l] += tmp[0][l];
      gt[1][l] += tmp[1][l];
    }
  }

  double forward(const ModelParams& params, const Architecture& arch, const RatingRecord& r, bool all_heads) {
    for (int mode = 0; mode < arity; ++mode) {
      const auto& table = params.embeddings[mode];
      const auto idx = mode_index(r, mode);
      if (idx >= table.rows) throw ConfigError("record index out of range for embedding table");
      raw[mode] = table.row(idx);
      const auto& g = arch.transforms[mode];
      if (g) {
        for (std::size_t l = 0; l < k; ++l) t[mode][l] = g->value_and_slope(raw[mode][l], slope[mode][l]);
      } else {
        std::copy(raw[mode].begin(), raw[mode].end(), t[mode].begin());
        std::fill(slope[mode].begin(), slope[mode].end(), 1.0);
      }
    }
    double pred = 0.0;
    for (std::size_t m = 0; m < n_ops; ++m) {
      const double c = arch.alpha[m];
      if (c == 0.0 && !all_heads) continue;
      op_forward(arch.ops[m], m);
      h[m] = head_forward(params, m);
      if (c != 0.0) pred += c * h[m];
    }
    return pred;
  }

  std::int32_t touch(const ModelParams& params, int mode, std::size_t row) {
    auto& s = slot[mode][row];
    if (s < 0) {
      auto& sr = result.model.embeddings[mode];
      s = static_cast<std::int32_t>(sr.rows.size());
      sr.rows.push_back(static_cast<std::uint32_t>(row));
      sr.values.resize(sr.values.size() + k, 0.0);
      (void)params;
    }
    return s;
  }

  const LossAndGrads& run(const ModelParams& params, const Architecture& arch, std::span<const RatingRecord> records,
                          double lambda, GradRequest req) {
    if (lambda < 0.0) throw ConfigError("lambda must be non-negative");
    if (arch.alpha.size() != n_ops || arch.arity() != arity) throw ConfigError("architecture shape changed");
    result.loss = result.data_loss = 0.0;
    for (int mode = 0; mode < arity; ++mode) {
      auto& sr = result.model.embeddings[mode];
      for (auto row : sr.rows) slot[mode][row] = -1;
      sr.rows.clear();
      sr.values.clear();
    }
    for (std::size_t m = 0; m < n_ops; ++m) {
      if (req.model)
        result.model.heads[m].assign(params.heads[m].size(), 0.0);
      else
        result.model.heads[m].clear();
    }
    std::fill(result.arch.alpha.begin(), result.arch.alpha.end(), 0.0);
    for (int mode = 0; mode < 3; ++mode) {
      const auto& g = arch.transforms[mode];
      if (req.transforms && g && mode < arity)
        result.arch.transforms[mode].assign(g->param_count(), 0.0);
      else
        result.arch.transforms[mode].clear();
    }
    if (records.empty()) return result;

    const double inv_b = 1.0 / static_cast<double>(records.size());
    const bool backprop = req.model || req.transforms;
    for (const auto& r : records) {
      const double pred = forward(params, arch, r, req.alpha);
      const double err = pred - r.value;
      result.data_loss += err * err;
      const double delta = 2.0 * err * inv_b;

      std::array<std::int32_t, 3> slots{-1, -1, -1};
      for (int mode = 0; mode < arity; ++mode) slots[mode] = touch(params, mode, mode_index(r, mode));

      if (req.alpha)
        for (std::size_t m = 0; m < n_ops; ++m) result.arch.alpha[m] += delta * h[m];
      if (!backprop) continue;

      for (int mode = 0; mode < arity; ++mode) std::fill(gt[mode].begin(), gt[mode].end(), 0.0);
      for (std::size_t m = 0; m < n_ops; ++m) {
        const double c = arch.alpha[m];
        if (c == 0.0) continue;
        head_backward(params, m, delta * c, req.model ? &result.model.heads[m] : nullptr);
        op_backward(arch.ops[m], m);
      }
      for (int mode = 0; mode < arity; ++mode) {
        if (req.model) {
          double* g = result.model.embeddings[mode].values.data() + static_cast<std::size_t>(slots[mode]) * k;
          for (std::size_t l = 0; l < k; ++l) g[l] += gt[mode][l] * slope[mode][l];
        }
        const auto& tf = arch.transforms[mode];
        if (req.transforms && tf)
          for (std::size_t l = 0; l < k; ++l)
            tf->accumulate_param_grad(raw[mode][l], gt[mode][l], result.arch.transforms[mode]);
      }
    }
    result.data_loss *= inv_b;

    double reg = 0.0;
    for (int mode = 0; mode < arity; ++mode) {
      auto& sr = result.model.embeddings[mode];
      for (std::size_t s = 0; s < sr.rows.size(); ++s) {
        const auto row = params.embeddings[mode].row(sr.rows[s]);
        for (std::size_t l = 0; l < k; ++l) {
          reg += row[l] * row[l];
          if (req.model) sr.values[s * k + l] += lambda * row[l];
        }
      }
      if (!req.model) sr.values.assign(sr.values.size(), 0.0);
    }
    result.loss = result.data_loss + 0.5 * lambda * reg;
    return result;
  }
};

BatchEvaluator::BatchEvaluator(const ModelParams& params, const Architecture& arch)
    : impl_(std::make_shared<Impl>(params, arch)) {}

const LossAndGrads& BatchEvaluator::run(const ModelParams& params, const Architecture& arch,
                                        std::span<const RatingRecord> records, double lambda, GradRequest request) {
  return impl_->run(params, arch, records, lambda, request);
}

double BatchEvaluator::predict(const ModelParams& params, const Architecture& arch, const RatingRecord& r) {
  return impl_->forward(params, arch, r, false);
}

double predict(const ModelParams& params, const Architecture& arch, const RatingRecord& index) {
  BatchEvaluator eval(params, arch);
  return eval.predict(params, arch, index);
}

std::vector<double> predict_all(const ModelParams& params, const Architecture& arch,
                                std::span<const RatingRecord> records) {
  BatchEvaluator eval(params, arch);
  std::vector<double> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(eval.predict(params, arch, r));
  return out;
}

LossAndGrads loss_and_grads(const ModelParams& params, const Architecture& arch, const Batch& batch, double lambda,
                            GradRequest request) {
  BatchEvaluator eval(params, arch);
  return eval.run(params, arch, batch.records, lambda, request);
}

AdagradState AdagradState::for_params(const ModelParams& params, double lr) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be positive");
  AdagradState s;
  s.lr = lr;
  for (const auto& e : params.embeddings) s.embeddings.emplace_back(e.rows, e.cols, 0.0);
  for (const auto& h : params.heads) s.heads.emplace_back(h.size(), 0.0);
  return s;
}

void adagrad_step(ModelParams& params, const ModelGrads& grads, AdagradState& state) {
  for (std::size_t mode = 0; mode < grads.embeddings.size(); ++mode) {
    const auto& sr = grads.embeddings[mode];
    auto& table = params.embeddings[mode];
    auto& acc = state.embeddings[mode];
    for (std::size_t s = 0; s < sr.rows.size(); ++s) {
      auto x = table.row(sr.rows[s]);
      auto G = acc.row(sr.rows[s]);
      const auto g = sr.grad(s);
      for (std::size_t l = 0; l < x.size(); ++l) {
        G[l] += g[l] * g[l];
        x[l] -= state.lr * g[l] / std::sqrt(G[l] + state.eps);
      }
    }
  }
  for (std::size_t m = 0; m < grads.heads.size(); ++m) {
    const auto& g = grads.heads[m];
    if (g.empty()) continue;
    auto& w = params.heads[m];
    auto& G = state.heads[m];
    for (std::size_t i = 0; i < w.size(); ++i) {
      G[i] += g[i] * g[i];
      w[i] -= state.lr * g[i] / std::sqrt(G[i] + state.eps);
    }
    if (params.predictor == PredictorMode::linear) project_unit_ball_inplace(w);
  }
}

double split_rmse(const ModelParams& params, const Architecture& arch, const RatingDataset& dataset, Split split) {
  BatchEvaluator eval(params, arch);
  const auto idx = dataset.indices(split);
  if (idx.empty()) return std::numeric_limits<double>::quiet_NaN();
  double sse = 0.0;
  for (auto i : idx) {
    const auto& r = dataset.record(i);
    const double e = eval.predict(params, arch, r) - r.value;
    sse += e * e;
  }
  return std::sqrt(sse / static_cast<double>(idx.size()));
}

namespace {

void check_arch_for_training(const Architecture& arch, const RatingDataset& dataset) {
  if (arch.alpha.size() != arch.ops.size()) throw ConfigError("alpha length differs from operation count");
  if (arch.arity() != dataset.order()) throw ConfigError("architecture arity does not match data order");
  if (std::all_of(arch.alpha.begin(), arch.alpha.end(), [](double a) { return a == 0.0; }))
    throw ConfigError("architecture selects no operation");
}

}  // namespace

TrainResult train_fixed(const RatingDataset& dataset, const Architecture& arch_in, const TrainConfig& config,
                        const EpochCallback& on_epoch) {
  using Clock = std::chrono::steady_clock;
  const auto start = Clock::now();
  check_arch_for_training(arch_in, dataset);
  if (config.max_epochs == 0) throw ConfigError("max_epochs must be at least 1");
  if (dataset.split_size(Split::train) == 0) throw ConfigError("training split is empty");
  if (dataset.split_size(Split::validation) == 0) throw ConfigError("validation split is empty");

  TrainResult out;
  out.arch = arch_in;
  auto& arch = out.arch;
  ModelParams params = init_model(dataset, arch.ops,
                                  {config.dim, config.predictor, config.mlp_hidden, config.init_std, config.seed});
  auto state = AdagradState::for_params(params, config.lr);
  BatchSampler sampler(dataset, Split::train, config.batch_size, derive_seed(config.seed, kTrainSamplerStream));
  BatchEvaluator eval(params, arch);

  out.best_val_rmse = std::numeric_limits<double>::infinity();
  std::size_t since_best = 0;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  Architecture best_arch = arch;
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto n_batches = sampler.batches_per_epoch();
    for (std::size_t b = 0; b < n_batches; ++b) {
      const auto batch = sampler.next();
      const auto& res = eval.run(params, arch, batch.records, config.lambda, {true, false, config.learn_transforms});
      if (!std::isfinite(res.loss))
        throw DivergenceError("training loss became non-finite at epoch " + std::to_string(epoch));
      adagrad_step(params, res.model, state);
      if (config.learn_transforms) {
        for (int mode = 0; mode < 3; ++mode) {
          auto& g = arch.transforms[mode];
          const auto& d = res.arch.transforms[mode];
          if (!g || d.empty()) continue;
          auto th = g->theta();
          for (std::size_t i = 0; i < th.size(); ++i) th[i] -= config.lr * d[i];
          project_unit_ball_inplace(th);
        }
      }
    }
    EpochMetrics em;
    em.epoch = epoch;
    em.val_rmse = split_rmse(params, arch, dataset, Split::validation);
    em.train_rmse = config.track_all_splits ? split_rmse(params, arch, dataset, Split::train) : nan;
    em.test_rmse = config.track_all_splits ? split_rmse(params, arch, dataset, Split::test) : nan;
    em.seconds = std::chrono::duration<double>(Clock::now() - start).count();
    if (!std::isfinite(em.val_rmse))
      throw DivergenceError("validation RMSE became non-finite at epoch " + std::to_string(epoch));
    out.epochs.push_back(em);
    if (on_epoch) on_epoch(em);

    if (em.val_rmse < out.best_val_rmse) {
      out.best_val_rmse = em.val_rmse;
      out.best_epoch = epoch;
      out.params = params;
      best_arch = arch;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      break;
    }
  }
  arch = best_arch;
  out.seconds = std::chrono::duration<double>(Clock::now() - start).count();
  return out;
}

TrainResult train_fixed(const RatingDataset& dataset, Candidate op, const TrainConfig& config) {
  return train_fixed(dataset, Architecture::single(op), config);
}

}  // namespace sif
