#include "sif/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <unordered_set>

#include <nlohmann/json.hpp>

#include "sif/error.hpp"

namespace sif {

namespace {

std::vector<std::uint64_t> sample_cells(std::uint64_t total, std::size_t count, std::mt19937_64& rng) {
  std::vector<std::uint64_t> cells;
  if (count * 2 >= total) {
    cells.resize(total);
    std::iota(cells.begin(), cells.end(), std::uint64_t{0});
    std::shuffle(cells.begin(), cells.end(), rng);
    cells.resize(count);
  } else {
    std::uniform_int_distribution<std::uint64_t> pick(0, total - 1);
    std::unordered_set<std::uint64_t> seen;
    seen.reserve(count * 2);
    cells.reserve(count);
    while (cells.size() < count) {
      const auto c = pick(rng);
      if (seen.insert(c).second) cells.push_back(c);
    }
  }
  std::sort(cells.begin(), cells.end());
  return cells;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticSpec& spec) {
  const int order = spec.op.arity() == 3 ? 3 : 2;
  auto dims = spec.dims;
  if (order == 2) dims[2] = 1;
  if (dims[0] == 0 || dims[1] == 0 || dims[2] == 0) throw ConfigError("synthetic dims must be positive");
  if (spec.dim == 0) throw ConfigError("synthetic embedding dimension must be positive");
  if (spec.noise < 0.0) throw ConfigError("synthetic noise must be non-negative");

  const std::uint64_t total = static_cast<std::uint64_t>(dims[0]) * dims[1] * dims[2];
  std::size_t count = spec.count;
  if (count == 0) {
    if (!(spec.density > 0.0 && spec.density <= 1.0)) throw ConfigError("synthetic density must lie in (0, 1]");
    count = static_cast<std::size_t>(std::llround(spec.density * static_cast<double>(total)));
    count = std::max<std::size_t>(count, 1);
  }
  if (count > total) throw ConfigError("more synthetic entries requested than cells exist");

  std::mt19937_64 rng(spec.seed);
  std::normal_distribution<double> normal(spec.embedding_mean, spec.embedding_std);

  SyntheticData out;
  for (int m = 0; m < order; ++m) {
    Table t(dims[static_cast<std::size_t>(m)], spec.dim);
    for (auto& x : t.data) x = normal(rng);
    out.embeddings.push_back(std::move(t));
  }
  const std::size_t out_dim = spec.op.output_dim(spec.dim);
  out.w.assign(out_dim, 1.0 / std::sqrt(static_cast<double>(out_dim)));

  ModelParams truth;
  truth.dim = spec.dim;
  truth.embeddings = out.embeddings;
  truth.heads = {out.w};
  truth.head_inputs = {out_dim};
  const auto arch = Architecture::single(spec.op);

  const auto cells = sample_cells(total, count, rng);
  std::normal_distribution<double> noise(0.0, 1.0);
  std::vector<RatingRecord> records;
  records.reserve(cells.size());
  double noise_sq = 0.0;
  for (auto c : cells) {
    RatingRecord r;
    r.depth = static_cast<std::uint32_t>(c % dims[2]);
    c /= dims[2];
    r.col = static_cast<std::uint32_t>(c % dims[1]);
    r.row = static_cast<std::uint32_t>(c / dims[1]);
    const double e = spec.noise * noise(rng);
    noise_sq += e * e;
    r.value = predict(truth, arch, r) + e;
    records.push_back(r);
  }
  out.noise_rms = std::sqrt(noise_sq / static_cast<double>(records.size()));
  out.dataset = RatingDataset(std::move(records), dims, order);
  return out;
}

void write_dataset_file(const std::filesystem::path& path, const RatingDataset& dataset) {
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f.precision(17);
  if (dataset.order() == 3) {
    const auto& d = dataset.dims();
    f << "# dims " << d[0] << ' ' << d[1] << ' ' << d[2] << '\n';
    for (const auto& r : dataset.records()) f << r.row << ',' << r.col << ',' << r.depth << ',' << r.value << '\n';
  } else {
    for (const auto& r : dataset.records()) f << r.row << '\t' << r.col << '\t' << r.value << "\t0\n";
  }
  if (!f) throw Error("write failed: " + path.string());
}

void write_truth_file(const std::filesystem::path& path, const SyntheticSpec& spec, const SyntheticData& data) {
  nlohmann::json j;
  j["op"] = spec.op.name();
  j["dims"] = data.dataset.dims();
  j["order"] = data.dataset.order();
  j["embedding_dim"] = spec.dim;
  j["entries"] = data.dataset.size();
  j["embedding_mean"] = spec.embedding_mean;
  j["embedding_std"] = spec.embedding_std;
  j["noise_std"] = spec.noise;
  j["noise_rms"] = data.noise_rms;
  j["seed"] = spec.seed;
  j["w"] = data.w;
  auto& emb = j["embeddings"];
  emb = nlohmann::json::array();
  for (const auto& t : data.embeddings) emb.push_back(t.data);
  std::ofstream f(path);
  if (!f) throw Error("cannot write " + path.string());
  f << j.dump(1) << '\n';
}

}  // namespace sif
