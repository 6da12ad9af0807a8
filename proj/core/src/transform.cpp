#include "sif/transform.hpp"

#include <cmath>

#include "sif/error.hpp"
#include "sif/prox.hpp"

namespace sif {

namespace {

struct ActOut {
  double value;
  double slope;
};

inline ActOut activate(Activation act, double z) {
  switch (act) {
    case Activation::sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-z));
      return {s, s * (1.0 - s)};
    }
    case Activation::relu:
      // derivative 0 at the kink
      return z > 0.0 ? ActOut{z, 1.0} : ActOut{0.0, 0.0};
    case Activation::tanh: {
      const double t = std::tanh(z);
      return {t, 1.0 - t * t};
    }
  }
  return {0.0, 0.0};
}

}  // namespace

std::string_view activation_name(Activation act) {
  switch (act) {
    case Activation::sigmoid: return "sigmoid";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
  }
  return "?";
}

Activation parse_activation(std::string_view name) {
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(name) + "'");
}

ElementTransform::ElementTransform(std::size_t hidden, Activation act)
    : hidden_(hidden), act_(act), theta_(3 * hidden + 1, 0.0) {
  if (hidden == 0) throw ConfigError("element-wise transform needs at least one hidden unit");
}

ElementTransform::ElementTransform(std::size_t hidden, Activation act, std::vector<double> theta)
    : hidden_(hidden), act_(act), theta_(std::move(theta)) {
  if (hidden == 0) throw ConfigError("element-wise transform needs at least one hidden unit");
  if (theta_.size() != 3 * hidden + 1)
    throw ConfigError("transform expects " + std::to_string(3 * hidden + 1) + " parameters, got " +
                      std::to_string(theta_.size()));
}

ElementTransform ElementTransform::random(std::size_t hidden, Activation act, std::mt19937_64& rng) {
  auto g = uniform(hidden, act, 0.5, rng);
  project_unit_ball_inplace(g.theta_);
  return g;
}

ElementTransform ElementTransform::uniform(std::size_t hidden, Activation act, double range,
                                           std::mt19937_64& rng) {
  ElementTransform g(hidden, act);
  std::uniform_real_distribution<double> dist(-range, range);
  for (auto& t : g.theta_) t = dist(rng);
  return g;
}

double ElementTransform::operator()(double x) const {
  double y = b2();
  for (std::size_t h = 0; h < hidden_; ++h) y += w2(h) * activate(act_, w1(h) * x + b1(h)).value;
  return y;
}

double ElementTransform::value_and_slope(double x, double& slope) const {
  double y = b2();
  slope = 0.0;
  for (std::size_t h = 0; h < hidden_; ++h) {
    const auto a = activate(act_, w1(h) * x + b1(h));
    y += w2(h) * a.value;
    slope += w2(h) * a.slope * w1(h);
  }
  return y;
}

void ElementTransform::accumulate_param_grad(double x, double scale, std::span<double> dtheta) const {
  for (std::size_t h = 0; h < hidden_; ++h) {
    const auto a = activate(act_, w1(h) * x + b1(h));
    const double dz = scale * w2(h) * a.slope;
    dtheta[h] += dz * x;
    dtheta[hidden_ + h] += dz;
    dtheta[2 * hidden_ + h] += scale * a.value;
  }
  dtheta[3 * hidden_] += scale;
}

double transform(double x, const ElementTransform& g) {
  if (!std::isfinite(x)) throw ConfigError("transform input is not finite");
  return g(x);
}

TransformGrad transform_grad(double x, const ElementTransform& g) {
  if (!std::isfinite(x)) throw ConfigError("transform input is not finite");
  TransformGrad out{0.0, std::vector<double>(g.param_count(), 0.0)};
  g.value_and_slope(x, out.dx);
  g.accumulate_param_grad(x, 1.0, out.dtheta);
  return out;
}

std::vector<double> transform_vector(std::span<const double> v, const ElementTransform& g) {
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = transform(v[i], g);
  return out;
}

}  // namespace sif
