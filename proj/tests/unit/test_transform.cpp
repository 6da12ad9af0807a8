#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "sif/error.hpp"
#include "sif/prox.hpp"
#include "sif/transform.hpp"

namespace sif {
namespace {

double act(Activation a, double z) {
  switch (a) {
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
    case Activation::relu: return z > 0.0 ? z : 0.0;
    case Activation::tanh: return std::tanh(z);
  }
  return 0.0;
}

// Direct evaluation from the flat [w1 | b1 | w2 | b2] layout.
double naive(double x, std::span<const double> th, std::size_t h, Activation a) {
  double y = th[3 * h];
  for (std::size_t i = 0; i < h; ++i) y += th[2 * h + i] * act(a, th[i] * x + th[h + i]);
  return y;
}

std::vector<double> random_theta(std::size_t h, std::mt19937_64& rng, double range = 1.0) {
  std::uniform_real_distribution<double> u(-range, range);
  std::vector<double> th(3 * h + 1);
  for (auto& t : th) t = u(rng);
  return th;
}

TEST(Transform, ZeroWeightsGiveZeroMap) {
  const ElementTransform g(5, Activation::sigmoid);
  for (double x : {-3.0, 0.0, 2.5}) {
    EXPECT_EQ(g(x), 0.0);
    const auto gr = transform_grad(x, g);
    EXPECT_EQ(gr.dx, 0.0);
  }
}

TEST(Transform, ConstantOutputFromZeroInputWeights) {
  const double c = 0.3;
  std::vector<double> th(16, 0.0);
  for (int i = 10; i < 15; ++i) th[i] = c;
  const ElementTransform g(5, Activation::sigmoid, th);
  for (double x : {-2.0, 0.0, 1.7}) EXPECT_NEAR(g(x), 5 * c * 0.5, 1e-15);
}

TEST(Transform, MatchesNaiveEvaluation) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> xs(-3.0, 3.0);
  for (auto a : {Activation::sigmoid, Activation::relu, Activation::tanh}) {
    for (std::size_t h : {1u, 5u, 10u, 20u}) {
      const auto th = random_theta(h, rng);
      const ElementTransform g(h, a, th);
      for (int t = 0; t < 20; ++t) {
        const double x = xs(rng);
        EXPECT_NEAR(g(x), naive(x, th, h, a), 1e-14);
        EXPECT_NEAR(transform(x, g), naive(x, th, h, a), 1e-14);
      }
    }
  }
}

TEST(Transform, BiasGradientIsOne) {
  std::mt19937_64 rng(6);
  const ElementTransform g(5, Activation::sigmoid, random_theta(5, rng));
  for (double x : {-1.0, 0.3, 2.0}) EXPECT_EQ(transform_grad(x, g).dtheta.back(), 1.0);
}

TEST(Transform, GradientsMatchFiniteDifferences) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> xs(-3.0, 3.0);
  for (auto a : {Activation::sigmoid, Activation::relu, Activation::tanh}) {
    for (int t = 0; t < 100; ++t) {
      const std::size_t h = 1 + t % 7;
      const auto th = random_theta(h, rng);
      const ElementTransform g(h, a, th);
      double x = xs(rng);
      if (a == Activation::relu) {
        // Keep every pre-activation off the kink.
        bool near_kink = true;
        while (near_kink) {
          near_kink = false;
          for (std::size_t i = 0; i < h; ++i) near_kink = near_kink || std::abs(th[i] * x + th[h + i]) < 1e-4;
          if (near_kink) x = xs(rng);
        }
      }
      const auto gr = transform_grad(x, g);
      const auto ndx = oracle::central_gradient([&](std::span<const double> v) { return naive(v[0], th, h, a); }, {x});
      EXPECT_LT(oracle::relative_error(gr.dx, ndx[0]), 1e-6);
      const auto nth =
          oracle::central_gradient([&](std::span<const double> v) { return naive(x, v, h, a); }, th);
      EXPECT_LT(oracle::relative_error(gr.dtheta, nth), 1e-6) << activation_name(a);

      double slope = 0.0;
      EXPECT_DOUBLE_EQ(g.value_and_slope(x, slope), g(x));
      EXPECT_DOUBLE_EQ(slope, gr.dx);
    }
  }
}

TEST(Transform, ReluDerivativeAtZeroIsZero) {
  // One hidden unit with w1 = 1, b1 = 0, w2 = 1: g(x) = relu(x).
  const ElementTransform g(1, Activation::relu, {1.0, 0.0, 1.0, 0.0});
  EXPECT_EQ(transform_grad(0.0, g).dx, 0.0);
  EXPECT_EQ(transform_grad(0.5, g).dx, 1.0);
}

TEST(Transform, VectorAppliesElementwise) {
  std::mt19937_64 rng(8);
  const ElementTransform g(5, Activation::tanh, random_theta(5, rng));
  const std::vector<double> v{-1.0, 0.0, 0.5, 2.0};
  const auto out = transform_vector(v, g);
  ASSERT_EQ(out.size(), v.size());
  for (std::size_t i = 0; i < v.size(); ++i) EXPECT_EQ(out[i], g(v[i]));
}

TEST(Transform, RandomInitInsideBallAndSeeded) {
  std::mt19937_64 a(9), b(9);
  for (int t = 0; t < 50; ++t) {
    const auto g = ElementTransform::random(5, Activation::sigmoid, a);
    const auto h = ElementTransform::random(5, Activation::sigmoid, b);
    EXPECT_TRUE(in_unit_ball(g.theta()));
    EXPECT_EQ(std::vector<double>(g.theta().begin(), g.theta().end()),
              std::vector<double>(h.theta().begin(), h.theta().end()));
  }
}

TEST(Transform, BadThetaLengthRejected) {
  EXPECT_THROW(ElementTransform(5, Activation::sigmoid, std::vector<double>(15)), ConfigError);
  EXPECT_EQ(parse_activation("relu"), Activation::relu);
  EXPECT_THROW(parse_activation("softplus"), ConfigError);
}

}  // namespace
}  // namespace sif
