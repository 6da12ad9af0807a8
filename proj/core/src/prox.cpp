#include "sif/prox.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "sif/error.hpp"

namespace sif {

std::vector<std::size_t> top_k_support(std::span<const double> z, std::size_t k) {
  if (k == 0 || k > z.size()) throw ConfigError("prox_ck requires 1 <= k <= d");
  std::vector<std::size_t> idx(z.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return std::abs(z[a]) > std::abs(z[b]); });
  idx.resize(k);
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<double> prox_c1(std::span<const double> z) { return prox_ck(z, 1); }

std::vector<double> prox_c2(std::span<const double> z) {
  std::vector<double> out(z.begin(), z.end());
  for (auto& x : out) x = std::clamp(x, 0.0, 1.0);
  return out;
}

std::vector<double> prox_ck(std::span<const double> z, std::size_t k) {
  std::vector<double> out(z.size(), 0.0);
  for (auto i : top_k_support(z, k)) out[i] = z[i];
  return out;
}

void project_unit_ball_inplace(std::span<double> z) {
  double sq = 0.0;
  for (double x : z) sq += x * x;
  if (sq <= 1.0) return;
  const double inv = 1.0 / std::sqrt(sq);
  for (auto& x : z) x *= inv;
}

std::vector<double> project_unit_ball(std::span<const double> z) {
  std::vector<double> out(z.begin(), z.end());
  project_unit_ball_inplace(out);
  return out;
}

bool in_c1(std::span<const double> x) { return in_ck(x, 1); }

bool in_c2(std::span<const double> x) {
  return std::all_of(x.begin(), x.end(), [](double v) { return v >= 0.0 && v <= 1.0; });
}

// A zero input has no nonzero entry to keep, so membership allows fewer than k.
bool in_ck(std::span<const double> x, std::size_t k) {
  return static_cast<std::size_t>(std::count_if(x.begin(), x.end(), [](double v) { return v != 0.0; })) <= k;
}

bool in_unit_ball(std::span<const double> x, double tol) {
  double sq = 0.0;
  for (double v : x) sq += v * v;
  return std::sqrt(sq) <= 1.0 + tol;
}

}  // namespace sif
