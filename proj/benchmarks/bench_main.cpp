#include <benchmark/benchmark.h>

#include <random>

#include "sif/model.hpp"
#include "sif/ops.hpp"
#include "sif/prox.hpp"
#include "sif/synthetic.hpp"
#include "sif/transform.hpp"

namespace {

using namespace sif;

std::vector<double> random_vec(std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n;
  std::vector<double> v(k);
  for (auto& x : v) x = n(rng);
  return v;
}

void BM_Apply(benchmark::State& state) {
  const auto op = kAllOps[static_cast<std::size_t>(state.range(0))];
  const auto k = static_cast<std::size_t>(state.range(1));
  const auto a = random_vec(k, 1), b = random_vec(k, 2);
  std::vector<double> out(output_dim(op, k));
  for (auto _ : state) {
    apply(op, a, b, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetLabel(std::string(op_name(op)));
}
BENCHMARK(BM_Apply)->ArgsProduct({benchmark::CreateDenseRange(0, 8, 1), {8, 64}});

void BM_Transform(benchmark::State& state) {
  std::mt19937_64 rng(3);
  const auto g = ElementTransform::random(static_cast<std::size_t>(state.range(0)), Activation::sigmoid, rng);
  double x = 0.3, slope = 0.0;
  for (auto _ : state) {
    x = g.value_and_slope(x, slope) * 0.5;
    benchmark::DoNotOptimize(slope);
  }
}
BENCHMARK(BM_Transform)->Arg(1)->Arg(5)->Arg(20);

void BM_ProxTopK(benchmark::State& state) {
  const auto z = random_vec(static_cast<std::size_t>(state.range(0)), 4);
  for (auto _ : state) benchmark::DoNotOptimize(prox_ck(z, 3));
}
BENCHMARK(BM_ProxTopK)->Arg(6)->Arg(16);

RatingDataset bench_data() {
  SyntheticSpec s;
  s.op = OpKind::multiply;
  s.dims = {900, 1600, 1};
  s.dim = 8;
  s.count = 100000;
  s.embedding_mean = 1.0;
  s.embedding_std = 0.5;
  return split(generate_synthetic(s).dataset, {}, 1);
}

// One gradient evaluation on a 256-record batch: the inner loop of both training and search.
void BM_BatchGradient(benchmark::State& state) {
  static const auto ds = bench_data();
  std::vector<Candidate> ops;
  for (auto op : default_search_ops()) ops.emplace_back(op);
  const auto params = init_model(ds, ops, {8, PredictorMode::linear, 10, 0.1, 1});
  Architecture arch;
  arch.ops = ops;
  arch.alpha.assign(ops.size(), 0.0);
  arch.alpha[0] = 1.0;
  const bool transforms = state.range(0) != 0;
  std::mt19937_64 rng(5);
  if (transforms)
    for (int m = 0; m < 2; ++m) arch.transforms[m] = ElementTransform::random(5, Activation::sigmoid, rng);
  BatchSampler sampler(ds, Split::train, 256, 7);
  const auto batch = sampler.next();
  BatchEvaluator eval(params, arch);
  const GradRequest req{true, transforms, transforms};
  for (auto _ : state) benchmark::DoNotOptimize(eval.run(params, arch, batch.records, 1e-5, req).loss);
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(batch.size()));
}
BENCHMARK(BM_BatchGradient)->Arg(0)->Arg(1);

void BM_TrainEpoch(benchmark::State& state) {
  static const auto ds = bench_data();
  TrainConfig tc;
  tc.max_epochs = 1;
  tc.track_all_splits = false;
  for (auto _ : state) benchmark::DoNotOptimize(train_fixed(ds, OpKind::inner, tc).best_val_rmse);
}
BENCHMARK(BM_TrainEpoch)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
