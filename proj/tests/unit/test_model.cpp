#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sif/error.hpp"
#include "sif/model.hpp"
#include "sif/prox.hpp"
#include "sif/synthetic.hpp"

namespace sif {
namespace {

using V = std::vector<double>;

RatingDataset small_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(1.0, 5.0);
  std::vector<RatingRecord> recs;
  for (std::uint32_t i = 0; i < rows; ++i)
    for (std::uint32_t j = 0; j < cols; ++j) recs.push_back({i, j, 0, u(rng)});
  return RatingDataset(std::move(recs), {rows, cols, 1}, 2);
}

RatingDataset small_tensor(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<RatingRecord> recs;
  for (std::uint32_t i = 0; i < n; ++i)
    for (std::uint32_t j = 0; j < n; ++j)
      for (std::uint32_t l = 0; l < n; ++l) recs.push_back({i, j, l, u(rng)});
  return RatingDataset(std::move(recs), {n, n, n}, 3);
}

ElementTransform random_transform(std::mt19937_64& rng, std::size_t h = 3) {
  return ElementTransform::uniform(h, Activation::sigmoid, 1.0, rng);
}

double act(Activation a, double z) {
  switch (a) {
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::tanh: return std::tanh(z);
  }
  return 0.0;
}

// Straight-line evaluation written independently of the batch evaluator.
double naive_predict(const ModelParams& p, const Architecture& a, const RatingRecord& r) {
  const std::size_t idx[3] = {r.row, r.col, r.depth};
  std::vector<V> e;
  for (int mode = 0; mode < a.arity(); ++mode) {
    V x(p.embeddings[mode].row(idx[mode]).begin(), p.embeddings[mode].row(idx[mode]).end());
    if (const auto& g = a.transforms[mode]) {
      for (auto& v : x) {
        const auto h = g->hidden();
        const auto th = g->theta();
        double y = th[3 * h];
        for (std::size_t j = 0; j < h; ++j) y += th[2 * h + j] * act(g->activation(), th[j] * v + th[h + j]);
        v = y;
      }
    }
    e.push_back(std::move(x));
  }
  double pred = 0.0;
  for (std::size_t m = 0; m < a.ops.size(); ++m) {
    const auto& op = a.ops[m];
    const V o = op.is_tensor() ? apply_tensor(op.tensor_op(), e[0], e[1], e[2]) : apply(op.op(), e[0], e[1]);
    const auto& w = p.heads[m];
    double head = 0.0;
    if (p.predictor == PredictorMode::linear) {
      for (std::size_t i = 0; i < o.size(); ++i) head += w[i] * o[i];
    } else {
      const std::size_t H = p.mlp_hidden, in = o.size();
      head = w[H * in + 2 * H];
      for (std::size_t j = 0; j < H; ++j) {
        double z = w[H * in + j];
        for (std::size_t i = 0; i < in; ++i) z += w[j * in + i] * o[i];
        head += w[H * in + H + j] * std::max(z, 0.0);
      }
    }
    pred += a.alpha[m] * head;
  }
  return pred;
}

Architecture mixed(const std::vector<Candidate>& ops, std::mt19937_64& rng, int arity, bool transforms = true) {
  Architecture a;
  a.ops = ops;
  std::uniform_real_distribution<double> u(0.1, 1.0);
  for (std::size_t m = 0; m < ops.size(); ++m) a.alpha.push_back(u(rng));
  if (transforms)
    for (int mode = 0; mode < arity; ++mode) a.transforms[mode] = random_transform(rng);
  return a;
}

void perturb_heads(ModelParams& p, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 0.5);
  for (auto& h : p.heads)
    for (auto& x : h) x += n(rng);
}

TEST(Model, MultiplyWithUniformHeadIsScaledDotProduct) {
  const auto ds = small_matrix(3, 4, 1);
  const Candidate ops[] = {OpKind::multiply};
  const auto p = init_model(ds, ops, {4, PredictorMode::linear, 10, 0.5, 7});
  const auto a = Architecture::single(OpKind::multiply);
  for (const auto& r : ds.records()) {
    const auto u = p.embeddings[0].row(r.row), v = p.embeddings[1].row(r.col);
    EXPECT_NEAR(predict(p, a, r), std::inner_product(u.begin(), u.end(), v.begin(), 0.0) / 2.0, 1e-14);
  }
}

TEST(Model, ZeroTransformsGiveZeroAndBiasGivesConstant) {
  const auto ds = small_matrix(3, 4, 1);
  const Candidate ops[] = {OpKind::multiply};
  const auto p = init_model(ds, ops, {4, PredictorMode::linear, 10, 0.5, 7});
  auto a = Architecture::single(OpKind::multiply);
  a.transforms[0] = ElementTransform(5, Activation::sigmoid);
  a.transforms[1] = ElementTransform(5, Activation::sigmoid);
  for (const auto& r : ds.records()) EXPECT_EQ(predict(p, a, r), 0.0);
  std::vector<double> th(16, 0.0);
  th[15] = 0.5;
  a.transforms[0] = ElementTransform(5, Activation::sigmoid, th);
  a.transforms[1] = ElementTransform(5, Activation::sigmoid, th);
  // Every coordinate maps to 0.5, so the head sees 0.25 in each of 4 slots.
  for (const auto& r : ds.records()) EXPECT_NEAR(predict(p, a, r), 4 * 0.25 * 0.5, 1e-15);
}

TEST(Model, MatchesNaiveEvaluator) {
  std::mt19937_64 rng(3);
  const auto ds = small_matrix(5, 6, 2);
  std::vector<Candidate> ops;
  for (auto op : kAllOps) ops.emplace_back(op);
  for (auto mode : {PredictorMode::linear, PredictorMode::mlp}) {
    auto p = init_model(ds, ops, {3, mode, 4, 0.7, 11});
    perturb_heads(p, rng);
    const auto a = mixed(ops, rng, 2);
    const auto all = predict_all(p, a, ds.records());
    for (std::size_t i = 0; i < ds.size(); ++i)
      EXPECT_NEAR(all[i], naive_predict(p, a, ds.record(i)), 1e-12) << predictor_name(mode);
  }
  const auto ts = small_tensor(3, 4);
  const OpKind base[] = {OpKind::multiply, OpKind::plus, OpKind::min, OpKind::max};
  std::vector<Candidate> tops;
  for (const auto& t : enumerate_tensor_ops(base)) tops.emplace_back(t);
  auto p = init_model(ts, tops, {3, PredictorMode::linear, 4, 0.7, 12});
  const auto a = mixed(tops, rng, 3);
  for (const auto& r : ts.records()) EXPECT_NEAR(predict(p, a, r), naive_predict(p, a, r), 1e-12);
}

TEST(Model, OutOfRangeIndexThrows) {
  const auto ds = small_matrix(3, 4, 1);
  const Candidate ops[] = {OpKind::inner};
  const auto p = init_model(ds, ops, {2, PredictorMode::linear, 10, 0.1, 1});
  EXPECT_THROW(predict(p, Architecture::single(OpKind::inner), RatingRecord{3, 0, 0, 1.0}), ConfigError);
}

// Checks every analytic gradient of loss_and_grads against central differences.
void check_gradients(const RatingDataset& ds, const std::vector<Candidate>& ops, PredictorMode mode,
                     std::mt19937_64& rng) {
  auto p = init_model(ds, ops, {3, mode, 4, 0.7, 5});
  perturb_heads(p, rng);
  auto a = mixed(ops, rng, ds.order());
  Batch batch;
  std::uniform_int_distribution<std::size_t> pick(0, ds.size() - 1);
  for (int i = 0; i < 12; ++i) batch.records.push_back(ds.record(pick(rng)));
  const double lambda = 0.3;
  const auto g = loss_and_grads(p, a, batch, lambda, {true, true, true});
  const std::string tag = ops.front().name() + "/" + std::string(predictor_name(mode));

  auto loss_at = [&](const ModelParams& q, const Architecture& b) { return loss_and_grads(q, b, batch, lambda).loss; };

  for (int m = 0; m < ds.order(); ++m) {
    auto q = p;
    const auto num = oracle::central_gradient(
        [&](std::span<const double> x) {
          std::copy(x.begin(), x.end(), q.embeddings[m].data.begin());
          return loss_at(q, a);
        },
        p.embeddings[m].data);
    V dense(num.size(), 0.0);
    const auto& sr = g.model.embeddings[m];
    for (std::size_t s = 0; s < sr.rows.size(); ++s)
      for (std::size_t l = 0; l < p.dim; ++l) dense[sr.rows[s] * p.dim + l] = sr.grad(s)[l];
    EXPECT_LT(oracle::relative_error(dense, num), 1e-5) << tag << " embeddings mode " << m;
  }
  for (std::size_t m = 0; m < ops.size(); ++m) {
    auto q = p;
    const auto num = oracle::central_gradient(
        [&](std::span<const double> x) {
          q.heads[m].assign(x.begin(), x.end());
          return loss_at(q, a);
        },
        p.heads[m]);
    EXPECT_LT(oracle::relative_error(g.model.heads[m], num), 1e-5) << tag << " head " << m;
  }
  {
    auto b = a;
    const auto num = oracle::central_gradient(
        [&](std::span<const double> x) {
          b.alpha.assign(x.begin(), x.end());
          return loss_at(p, b);
        },
        a.alpha);
    EXPECT_LT(oracle::relative_error(g.arch.alpha, num), 1e-5) << tag << " alpha";
  }
  for (int mode = 0; mode < ds.order(); ++mode) {
    auto b = a;
    const V th(a.transforms[mode]->theta().begin(), a.transforms[mode]->theta().end());
    const auto num = oracle::central_gradient(
        [&](std::span<const double> x) {
          std::copy(x.begin(), x.end(), b.transforms[mode]->theta().begin());
          return loss_at(p, b);
        },
        th);
    EXPECT_LT(oracle::relative_error(g.arch.transforms[mode], num), 1e-5) << tag << " transform " << mode;
  }
}

TEST(Model, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(21);
  const auto ds = small_matrix(6, 5, 3);
  for (auto op : kAllOps)
    for (auto mode : {PredictorMode::linear, PredictorMode::mlp}) check_gradients(ds, {op}, mode, rng);
  std::vector<Candidate> all;
  for (auto op : kAllOps) all.emplace_back(op);
  check_gradients(ds, all, PredictorMode::linear, rng);
}

TEST(Model, TensorGradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(22);
  const auto ts = small_tensor(3, 6);
  const OpKind base[] = {OpKind::multiply, OpKind::plus, OpKind::min, OpKind::max};
  std::vector<Candidate> all;
  for (const auto& t : enumerate_tensor_ops(base)) {
    check_gradients(ts, {Candidate(t)}, PredictorMode::linear, rng);
    all.emplace_back(t);
  }
  check_gradients(ts, all, PredictorMode::linear, rng);
}

TEST(Model, OneHotRelaxationEqualsSingleOperation) {
  std::mt19937_64 rng(4);
  const auto ds = small_matrix(5, 5, 5);
  std::vector<Candidate> ops;
  for (auto op : default_search_ops()) ops.emplace_back(op);
  auto p = init_model(ds, ops, {4, PredictorMode::linear, 10, 0.5, 3});
  perturb_heads(p, rng);
  const auto batch = Batch{Split::train, {ds.records().begin(), ds.records().end()}};
  for (std::size_t m = 0; m < ops.size(); ++m) {
    auto relaxed = mixed(ops, rng, 2);
    relaxed.alpha.assign(ops.size(), 0.0);
    relaxed.alpha[m] = 1.0;
    Architecture single = Architecture::single(ops[m]);
    single.transforms = relaxed.transforms;
    ModelParams sp = p;
    sp.heads = {p.heads[m]};
    sp.head_inputs = {p.head_inputs[m]};
    const auto a = loss_and_grads(p, relaxed, batch, 0.01);
    const auto b = loss_and_grads(sp, single, batch, 0.01);
    EXPECT_DOUBLE_EQ(a.loss, b.loss) << ops[m].name();
    for (int mode = 0; mode < 2; ++mode) EXPECT_EQ(a.model.embeddings[mode].values, b.model.embeddings[mode].values);
    EXPECT_EQ(a.model.heads[m], b.model.heads[0]);
  }
}

TEST(Model, RescalingInnerModelLowersObjective) {
  // Without the head constraint, (bU, bV, w / b^2) predicts identically and
  // carries a strictly smaller penalty, so no nonzero minimiser exists.
  const auto ds = small_matrix(4, 4, 6);
  const Candidate ops[] = {OpKind::inner};
  auto p = init_model(ds, ops, {3, PredictorMode::linear, 10, 0.8, 9});
  const auto a = Architecture::single(OpKind::inner);
  const auto batch = Batch{Split::train, {ds.records().begin(), ds.records().end()}};
  const double lambda = 0.1, beta = 0.5;
  const auto before = loss_and_grads(p, a, batch, lambda);
  auto q = p;
  for (auto& t : q.embeddings)
    for (auto& x : t.data) x *= beta;
  q.heads[0][0] /= beta * beta;
  const auto after = loss_and_grads(q, a, batch, lambda);
  EXPECT_NEAR(after.data_loss, before.data_loss, 1e-12);
  EXPECT_LT(after.loss, before.loss);
}

TEST(Model, LossExamples) {
  const auto ds = small_matrix(2, 2, 1);
  const Candidate ops[] = {OpKind::inner};
  const auto p = init_model(ds, ops, {2, PredictorMode::linear, 10, 0.5, 2});
  const auto a = Architecture::single(OpKind::inner);
  RatingRecord r{1, 0, 0, 0.0};
  r.value = predict(p, a, r);
  const auto exact = loss_and_grads(p, a, Batch{Split::train, {r}}, 0.0);
  EXPECT_EQ(exact.loss, 0.0);
  for (const auto& sr : exact.model.embeddings)
    for (double g : sr.values) EXPECT_EQ(g, 0.0);

  const double lambda = 0.25;
  const auto reg = loss_and_grads(p, a, Batch{Split::train, {r}}, lambda);
  EXPECT_EQ(reg.data_loss, 0.0);
  for (int mode = 0; mode < 2; ++mode) {
    const auto& sr = reg.model.embeddings[mode];
    ASSERT_EQ(sr.rows.size(), 1u);
    const auto row = p.embeddings[mode].row(sr.rows[0]);
    for (std::size_t l = 0; l < 2; ++l) EXPECT_DOUBLE_EQ(sr.grad(0)[l], lambda * row[l]);
  }
  EXPECT_THROW(loss_and_grads(p, a, Batch{Split::train, {r}}, -1.0), ConfigError);
}

TEST(Adagrad, FirstStepIsSignStep) {
  const auto ds = small_matrix(3, 3, 1);
  const Candidate ops[] = {OpKind::multiply};
  auto p = init_model(ds, ops, {2, PredictorMode::linear, 10, 0.5, 2});
  const auto before = p;
  auto state = AdagradState::for_params(p, 0.01);
  ModelGrads g;
  g.embeddings.resize(2);
  g.embeddings[0] = {2, {1}, {3.0, -0.002}};
  g.embeddings[1] = {2, {}, {}};
  g.heads = {{0.0, 0.0}};
  adagrad_step(p, g, state);
  EXPECT_NEAR(p.embeddings[0].row(1)[0], before.embeddings[0].row(1)[0] - 0.01, 1e-9);
  // For a tiny gradient the epsilon term shows: the step is slightly under lr.
  EXPECT_NEAR(p.embeddings[0].row(1)[1], before.embeddings[0].row(1)[1] + 0.01 * 0.002 / std::sqrt(4e-6 + 1e-8),
              1e-15);
  EXPECT_NEAR(p.embeddings[0].row(1)[1], before.embeddings[0].row(1)[1] + 0.01, 2e-5);
  EXPECT_EQ(p.embeddings[0].row(0)[0], before.embeddings[0].row(0)[0]);
  EXPECT_EQ(p.embeddings[1], before.embeddings[1]);
  EXPECT_EQ(p.heads, before.heads);

  const double x1 = p.embeddings[0].row(1)[0];
  adagrad_step(p, g, state);
  const double x2 = p.embeddings[0].row(1)[0];
  EXPECT_LT(std::abs(x2 - x1), std::abs(x1 - before.embeddings[0].row(1)[0]));
  for (double G : state.embeddings[0].data) EXPECT_GE(G, 0.0);
  EXPECT_THROW(AdagradState::for_params(p, 0.0), ConfigError);
}

TEST(Adagrad, LinearHeadsStayInBall) {
  const auto ds = small_matrix(3, 3, 1);
  const Candidate ops[] = {OpKind::concat};
  auto p = init_model(ds, ops, {3, PredictorMode::linear, 10, 0.5, 2});
  auto state = AdagradState::for_params(p, 1.0);
  ModelGrads g;
  g.embeddings.resize(2, SparseRows{3, {}, {}});
  g.heads = {V(6, -5.0)};
  for (int t = 0; t < 10; ++t) {
    adagrad_step(p, g, state);
    EXPECT_TRUE(in_unit_ball(p.heads[0]));
  }
}

TEST(Model, FullBatchDescentIsMonotone) {
  const auto ds = small_matrix(5, 5, 8);
  const auto batch = Batch{Split::train, {ds.records().begin(), ds.records().end()}};
  for (auto op : {OpKind::inner, OpKind::multiply, OpKind::plus, OpKind::concat}) {
    const Candidate ops[] = {op};
    auto p = init_model(ds, ops, {3, PredictorMode::linear, 10, 0.5, 4});
    auto a = Architecture::single(op);
    const double lambda = 0.01, eta = 1e-3;
    double prev = loss_and_grads(p, a, batch, lambda).loss;
    for (int step = 0; step < 100; ++step) {
      const auto g = loss_and_grads(p, a, batch, lambda);
      for (int m = 0; m < 2; ++m) {
        const auto& sr = g.model.embeddings[m];
        for (std::size_t s = 0; s < sr.rows.size(); ++s) {
          auto row = p.embeddings[m].row(sr.rows[s]);
          for (std::size_t l = 0; l < row.size(); ++l) row[l] -= eta * sr.grad(s)[l];
        }
      }
      for (std::size_t i = 0; i < p.heads[0].size(); ++i) p.heads[0][i] -= eta * g.model.heads[0][i];
      const double now = loss_and_grads(p, a, batch, lambda).loss;
      EXPECT_LT(now, prev) << op_name(op) << " step " << step;
      prev = now;
    }
  }
}

TEST(Model, InitIsDeterministicAndShapesChecked) {
  const auto ds = small_matrix(4, 3, 1);
  const Candidate ops[] = {OpKind::multiply, OpKind::concat, OpKind::inner};
  for (auto mode : {PredictorMode::linear, PredictorMode::mlp}) {
    const auto a = init_model(ds, ops, {5, mode, 6, 0.1, 17});
    EXPECT_EQ(a, init_model(ds, ops, {5, mode, 6, 0.1, 17}));
    EXPECT_NE(a, init_model(ds, ops, {5, mode, 6, 0.1, 18}));
    EXPECT_EQ(a.head_inputs, (std::vector<std::size_t>{5, 10, 1}));
  }
  const auto lin = init_model(ds, ops, {5, PredictorMode::linear, 6, 0.1, 17});
  for (const auto& h : lin.heads) EXPECT_NEAR(std::sqrt(std::inner_product(h.begin(), h.end(), h.begin(), 0.0)), 1.0, 1e-12);

  // An MLP head depends on its operation, not its position.
  const Candidate swapped[] = {OpKind::inner, OpKind::concat, OpKind::multiply};
  const auto x = init_model(ds, ops, {5, PredictorMode::mlp, 6, 0.1, 17});
  const auto y = init_model(ds, swapped, {5, PredictorMode::mlp, 6, 0.1, 17});
  EXPECT_EQ(x.heads[0], y.heads[2]);

  Architecture arch;
  arch.ops = {OpKind::multiply, OpKind::concat};
  arch.alpha = {0.5, 0.5};
  EXPECT_THROW(check_compatible(lin, arch), ConfigError);
  EXPECT_THROW(init_model(ds, ops, {0, PredictorMode::linear, 6, 0.1, 1}), ConfigError);
  const Candidate tensor[] = {TensorOp{OpKind::plus, OpKind::plus}};
  EXPECT_THROW(init_model(ds, tensor, {2, PredictorMode::linear, 6, 0.1, 1}), ConfigError);
}

SyntheticData rank2(Candidate op, std::uint64_t seed) {
  SyntheticSpec s;
  s.op = op;
  s.dims = {40, 40, 1};
  s.dim = 2;
  s.density = 0.8;
  s.embedding_mean = 1.0;
  s.embedding_std = 0.5;
  s.seed = seed;
  return generate_synthetic(s);
}

TEST(Train, InnerFitsNoiselessRankTwoData) {
  const auto data = rank2(OpKind::inner, 3);
  const auto ds = split(data.dataset, {}, 1);
  TrainConfig tc;
  tc.dim = 2;
  tc.batch_size = 32;
  tc.max_epochs = 300;
  tc.patience = 300;
  tc.lr = 0.3;
  const auto inner = train_fixed(ds, OpKind::inner, tc);
  const double inner_rmse = split_rmse(inner.params, inner.arch, ds, Split::train);
  EXPECT_LT(inner_rmse, 0.05);
  const auto plus = train_fixed(ds, OpKind::plus, tc);
  EXPECT_GT(split_rmse(plus.params, plus.arch, ds, Split::train), inner_rmse);
  EXPECT_LE(inner.best_epoch, inner.epochs.size());
  EXPECT_EQ(inner.best_val_rmse, inner.epochs[inner.best_epoch - 1].val_rmse);
}

TEST(Train, EarlyStoppingHonoursPatienceAndDeterminism) {
  const auto ds = split(small_matrix(20, 20, 2), {}, 4);
  TrainConfig tc;
  tc.dim = 4;
  tc.max_epochs = 60;
  tc.patience = 3;
  tc.batch_size = 16;
  const auto a = train_fixed(ds, OpKind::multiply, tc);
  const auto b = train_fixed(ds, OpKind::multiply, tc);
  EXPECT_EQ(a.params, b.params);
  ASSERT_EQ(a.epochs.size(), b.epochs.size());
  for (std::size_t i = 0; i < a.epochs.size(); ++i) EXPECT_EQ(a.epochs[i].val_rmse, b.epochs[i].val_rmse);
  if (a.epochs.size() < tc.max_epochs) EXPECT_EQ(a.epochs.size(), a.best_epoch + tc.patience);
  EXPECT_DOUBLE_EQ(split_rmse(a.params, a.arch, ds, Split::validation), a.best_val_rmse);
  for (const auto& h : a.params.heads) EXPECT_TRUE(in_unit_ball(h));
}

TEST(Train, DivergenceIsReported) {
  const auto ds = split(small_matrix(20, 20, 2), {}, 4);
  TrainConfig tc;
  tc.dim = 4;
  tc.lr = 1e200;
  tc.max_epochs = 20;
  EXPECT_THROW(train_fixed(ds, OpKind::outer, tc), DivergenceError);
  auto arch = Architecture::single(OpKind::inner);
  arch.alpha = {0.0};
  EXPECT_THROW(train_fixed(ds, arch, TrainConfig{}), ConfigError);
}

TEST(Seeds, DerivedStreamsDiffer) {
  EXPECT_NE(derive_seed(1, kTrainSamplerStream), derive_seed(1, kValidationSamplerStream));
  EXPECT_NE(derive_seed(1, 1), derive_seed(2, 1));
  EXPECT_EQ(derive_seed(7, 3), derive_seed(7, 3));
}

}  // namespace
}  // namespace sif
