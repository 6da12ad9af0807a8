#include <gtest/gtest.h>

#include <random>

#include "oracles.hpp"
#include "sif/error.hpp"
#include "sif/ops.hpp"

namespace sif {
namespace {

using V = std::vector<double>;

V random_vec(std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-2.0, 2.0);
  V v(k);
  for (auto& x : v) x = u(rng);
  return v;
}

// Resamples b until no coordinate sits within `gap` of a's, so min/max stay
// differentiable across the finite-difference stencil.
V separated_from(const V& a, std::mt19937_64& rng, double gap = 1e-3) {
  for (;;) {
    auto b = random_vec(a.size(), rng);
    bool ok = true;
    for (std::size_t i = 0; i < a.size(); ++i) ok = ok && std::abs(a[i] - b[i]) > gap;
    if (ok) return b;
  }
}

TEST(Ops, ForwardExamples) {
  EXPECT_EQ(apply(OpKind::multiply, V{1, 2}, V{3, 4}), (V{3, 8}));
  EXPECT_EQ(apply(OpKind::concat, V{1, 2}, V{3, 4}), (V{1, 2, 3, 4}));
  EXPECT_EQ(apply(OpKind::inner, V{1, 2}, V{3, 4}), (V{11}));
  EXPECT_EQ(apply(OpKind::outer, V{1, 2}, V{3, 4}), (V{3, 4, 6, 8}));
  EXPECT_EQ(apply(OpKind::plus, V{1, 2}, V{3, 4}), (V{4, 6}));
  EXPECT_EQ(apply(OpKind::minus, V{1, 2}, V{3, 4}), (V{-2, -2}));
  EXPECT_EQ(apply(OpKind::min, V{1, 5}, V{3, 2}), (V{1, 2}));
  EXPECT_EQ(apply(OpKind::max, V{1, 5}, V{3, 2}), (V{3, 5}));
  EXPECT_EQ(apply(OpKind::conv, V{1, 0}, V{7, -3}), (V{7, -3}));
}

TEST(Ops, ConvIsCircular) {
  // (a*b)_t = sum_s a_s b_{(t-s) mod k}
  const V a{1, 2, 3}, b{4, 5, 6};
  EXPECT_EQ(apply(OpKind::conv, a, b), (V{1 * 4 + 2 * 6 + 3 * 5, 1 * 5 + 2 * 4 + 3 * 6, 1 * 6 + 2 * 5 + 3 * 4}));
}

TEST(Ops, AdjointExamples) {
  auto [ga, gb] = apply_adjoint(OpKind::multiply, V{1, 2}, V{3, 4}, V{1, 1});
  EXPECT_EQ(ga, (V{3, 4}));
  EXPECT_EQ(gb, (V{1, 2}));
  std::tie(ga, gb) = apply_adjoint(OpKind::plus, V{1, 2}, V{3, 4}, V{0.5, -2});
  EXPECT_EQ(ga, (V{0.5, -2}));
  EXPECT_EQ(gb, (V{0.5, -2}));
  std::tie(ga, gb) = apply_adjoint(OpKind::max, V{1, 5}, V{3, 2}, V{7, 9});
  EXPECT_EQ(ga, (V{0, 9}));
  EXPECT_EQ(gb, (V{7, 0}));
}

TEST(Ops, MinMaxTiesRouteToFirstArgument) {
  for (auto op : {OpKind::min, OpKind::max}) {
    auto [ga, gb] = apply_adjoint(op, V{2, 1}, V{2, 3}, V{5, 5});
    EXPECT_EQ(ga[0], 5.0);
    EXPECT_EQ(gb[0], 0.0);
  }
}

TEST(Ops, OutputDimContract) {
  for (std::size_t k = 1; k <= 64; ++k) {
    for (auto op : {OpKind::multiply, OpKind::plus, OpKind::minus, OpKind::min, OpKind::max, OpKind::conv})
      EXPECT_EQ(output_dim(op, k), k);
    EXPECT_EQ(output_dim(OpKind::concat, k), 2 * k);
    EXPECT_EQ(output_dim(OpKind::inner, k), 1u);
    EXPECT_EQ(output_dim(OpKind::outer, k), k * k);
    const V a(k, 0.5), b(k, -0.25);
    for (auto op : kAllOps) EXPECT_EQ(apply(op, a, b).size(), output_dim(op, k));
  }
}

TEST(Ops, LengthMismatchThrows) {
  for (auto op : kAllOps) EXPECT_THROW(apply(op, V{1, 2}, V{1, 2, 3}), ConfigError);
  EXPECT_THROW(apply_adjoint(OpKind::multiply, V{1, 2}, V{3, 4}, V{1}), ConfigError);
  EXPECT_THROW(apply_adjoint(OpKind::inner, V{1, 2}, V{3, 4}, V{1, 1}), ConfigError);
}

TEST(Ops, Commutativity) {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_vec(6, rng), b = random_vec(6, rng);
    for (auto op : {OpKind::multiply, OpKind::plus, OpKind::min, OpKind::max})
      EXPECT_EQ(apply(op, a, b), apply(op, b, a));
    EXPECT_NE(apply(OpKind::concat, a, b), apply(OpKind::concat, b, a));
    EXPECT_NE(apply(OpKind::minus, a, b), apply(OpKind::minus, b, a));
  }
}

TEST(Ops, ConvIsLinearInEachArgument) {
  std::mt19937_64 rng(4);
  for (int t = 0; t < 50; ++t) {
    const auto a = random_vec(7, rng), b1 = random_vec(7, rng), b2 = random_vec(7, rng);
    V sum(7);
    for (int i = 0; i < 7; ++i) sum[i] = b1[i] + b2[i];
    const auto lhs = apply(OpKind::conv, a, sum);
    const auto r1 = apply(OpKind::conv, a, b1), r2 = apply(OpKind::conv, a, b2);
    for (int i = 0; i < 7; ++i) EXPECT_NEAR(lhs[i], r1[i] + r2[i], 1e-12);
  }
}

TEST(Ops, AdjointMatchesFiniteDifferences) {
  std::mt19937_64 rng(11);
  for (auto op : kAllOps) {
    for (int t = 0; t < 100; ++t) {
      const std::size_t k = 1 + t % 8;
      const auto a = random_vec(k, rng);
      const auto b = separated_from(a, rng);
      const auto up = random_vec(output_dim(op, k), rng);
      const auto [ga, gb] = apply_adjoint(op, a, b, up);
      auto pairing = [&](const V& x, const V& y) {
        const auto out = apply(op, x, y);
        return std::inner_product(out.begin(), out.end(), up.begin(), 0.0);
      };
      const auto na = oracle::central_gradient([&](std::span<const double> x) { return pairing(V(x.begin(), x.end()), b); }, a);
      const auto nb = oracle::central_gradient([&](std::span<const double> y) { return pairing(a, V(y.begin(), y.end())); }, b);
      EXPECT_LT(oracle::relative_error(ga, na), 1e-6) << op_name(op) << " k=" << k;
      EXPECT_LT(oracle::relative_error(gb, nb), 1e-6) << op_name(op) << " k=" << k;
    }
  }
}

TEST(Ops, Names) {
  for (auto op : kAllOps) EXPECT_EQ(parse_op(op_name(op)), op);
  EXPECT_THROW(parse_op("divide"), ConfigError);
  EXPECT_EQ(parse_op_list("plus,max"), (std::vector<OpKind>{OpKind::plus, OpKind::max}));
  const auto def = default_search_ops();
  EXPECT_EQ(def, (std::vector<OpKind>{OpKind::multiply, OpKind::plus, OpKind::min, OpKind::max, OpKind::concat,
                                      OpKind::inner}));
}

TEST(TensorOps, EnumerationCounts) {
  const OpKind two[] = {OpKind::max, OpKind::multiply};
  EXPECT_EQ(enumerate_tensor_ops(two).size(), 4u);
  const OpKind one[] = {OpKind::multiply};
  const auto single = enumerate_tensor_ops(one);
  ASSERT_EQ(single.size(), 1u);
  EXPECT_EQ(single[0].name(), "multiply_multiply");
  const OpKind four[] = {OpKind::plus, OpKind::min, OpKind::max, OpKind::multiply};
  const auto all = enumerate_tensor_ops(four);
  EXPECT_EQ(all.size(), 16u);
  for (std::size_t i = 0; i < all.size(); ++i)
    for (std::size_t j = i + 1; j < all.size(); ++j) EXPECT_FALSE(all[i] == all[j]);
}

TEST(TensorOps, DimensionChangingBasesRejected) {
  for (auto bad : {OpKind::concat, OpKind::inner, OpKind::conv, OpKind::outer}) {
    const OpKind base[] = {OpKind::multiply, bad};
    EXPECT_THROW(enumerate_tensor_ops(base), ConfigError) << op_name(bad);
  }
}

TEST(TensorOps, ForwardExamples) {
  const TensorOp max_mul{OpKind::max, OpKind::multiply};
  EXPECT_EQ(apply_tensor(max_mul, V{1}, V{2}, V{3}), (V{6}));
  const TensorOp mul_mul{OpKind::multiply, OpKind::multiply};
  EXPECT_EQ(apply_tensor(mul_mul, V{1, 2}, V{3, 4}, V{5, 6}), (V{15, 48}));
  EXPECT_THROW(apply_tensor(mul_mul, V{1, 2}, V{3}, V{5, 6}), ConfigError);
  EXPECT_EQ(parse_tensor_op("max_multiply"), max_mul);
  EXPECT_EQ(parse_candidate("max_multiply").tensor_op(), max_mul);
  EXPECT_EQ(parse_candidate("inner").op(), OpKind::inner);
}

TEST(TensorOps, AdjointMatchesFiniteDifferences) {
  std::mt19937_64 rng(12);
  const OpKind base[] = {OpKind::multiply, OpKind::plus, OpKind::min, OpKind::max};
  for (const auto& op : enumerate_tensor_ops(base)) {
    for (int t = 0; t < 100; ++t) {
      const std::size_t k = 1 + t % 8;
      auto u = random_vec(k, rng);
      auto v = separated_from(u, rng);
      // Keep o_inner(u, v) away from s as well.
      V s;
      for (;;) {
        s = random_vec(k, rng);
        const auto mid = apply(op.inner, u, v);
        bool ok = true;
        for (std::size_t i = 0; i < k; ++i) ok = ok && std::abs(mid[i] - s[i]) > 1e-3;
        if (ok) break;
      }
      const auto up = random_vec(k, rng);
      const auto g = apply_tensor_adjoint(op, u, v, s, up);
      auto pairing = [&](const V& a, const V& b, const V& c) {
        const auto out = apply_tensor(op, a, b, c);
        return std::inner_product(out.begin(), out.end(), up.begin(), 0.0);
      };
      const auto nu = oracle::central_gradient([&](std::span<const double> x) { return pairing(V(x.begin(), x.end()), v, s); }, u);
      const auto nv = oracle::central_gradient([&](std::span<const double> x) { return pairing(u, V(x.begin(), x.end()), s); }, v);
      const auto ns = oracle::central_gradient([&](std::span<const double> x) { return pairing(u, v, V(x.begin(), x.end())); }, s);
      EXPECT_LT(oracle::relative_error(g.u, nu), 1e-6) << op.name();
      EXPECT_LT(oracle::relative_error(g.v, nv), 1e-6) << op.name();
      EXPECT_LT(oracle::relative_error(g.s, ns), 1e-6) << op.name();
    }
  }
}

TEST(Candidate, Shapes) {
  const Candidate c = OpKind::concat;
  EXPECT_FALSE(c.is_tensor());
  EXPECT_EQ(c.arity(), 2);
  EXPECT_EQ(c.output_dim(4), 8u);
  const Candidate t = TensorOp{OpKind::plus, OpKind::max};
  EXPECT_TRUE(t.is_tensor());
  EXPECT_EQ(t.arity(), 3);
  EXPECT_EQ(t.output_dim(4), 4u);
  EXPECT_EQ(t.name(), "plus_max");
}

}  // namespace
}  // namespace sif
