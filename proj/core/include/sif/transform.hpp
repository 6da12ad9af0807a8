#pragma once

#include <cstddef>
#include <random>
#include <span>
#include <string_view>
#include <vector>

namespace sif {

enum class Activation { sigmoid, relu, tanh };

std::string_view activation_name(Activation act);
Activation parse_activation(std::string_view name);

/// Scalar one-hidden-layer network g(x) = b2 + sum_h w2_h * act(w1_h * x + b1_h),
/// applied independently to every embedding coordinate.
///
/// Parameters live in one flat vector laid out as [w1 | b1 | w2 | b2] so the
/// unit-ball constraint and its projection act on the whole set at once.
class ElementTransform {
 public:
  ElementTransform() = default;
  ElementTransform(std::size_t hidden, Activation act);
  ElementTransform(std::size_t hidden, Activation act, std::vector<double> theta);

  /// Uniform in [-0.5, 0.5] per weight, then projected onto the unit ball.
  static ElementTransform random(std::size_t hidden, Activation act, std::mt19937_64& rng);
  /// Uniform in [-range, range], left unprojected.
  static ElementTransform uniform(std::size_t hidden, Activation act, double range, std::mt19937_64& rng);

  std::size_t hidden() const noexcept { return hidden_; }
  Activation activation() const noexcept { return act_; }
  std::size_t param_count() const noexcept { return theta_.size(); }

  std::span<const double> theta() const noexcept { return theta_; }
  std::span<double> theta() noexcept { return theta_; }

  double w1(std::size_t h) const { return theta_[h]; }
  double b1(std::size_t h) const { return theta_[hidden_ + h]; }
  double w2(std::size_t h) const { return theta_[2 * hidden_ + h]; }
  double b2() const { return theta_[3 * hidden_]; }

  double operator()(double x) const;
  /// g(x) and dg/dx in one pass.
  double value_and_slope(double x, double& slope) const;
  /// dtheta += scale * dg/dtheta evaluated at x.
  void accumulate_param_grad(double x, double scale, std::span<double> dtheta) const;

 private:
  std::size_t hidden_ = 0;
  Activation act_ = Activation::sigmoid;
  std::vector<double> theta_;
};

struct TransformGrad {
  double dx = 0.0;
  std::vector<double> dtheta;  ///< Same layout as ElementTransform::theta().
};

double transform(double x, const ElementTransform& g);
TransformGrad transform_grad(double x, const ElementTransform& g);
std::vector<double> transform_vector(std::span<const double> v, const ElementTransform& g);

}  // namespace sif
