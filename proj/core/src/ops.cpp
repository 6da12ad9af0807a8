#include "sif/ops.hpp"

#include <algorithm>

#include "sif/error.hpp"

namespace sif {

namespace {

void check_inputs(OpKind op, std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size())
    throw ConfigError(std::string(op_name(op)) + ": operand lengths differ (" + std::to_string(a.size()) +
                      " vs " + std::to_string(b.size()) + ")");
}

void check_length(std::string_view what, std::size_t got, std::size_t want) {
  if (got != want)
    throw ConfigError(std::string(what) + " has length " + std::to_string(got) + ", expected " +
                      std::to_string(want));
}

}  // namespace

std::vector<OpKind> default_search_ops() {
  return {OpKind::multiply, OpKind::plus, OpKind::min, OpKind::max, OpKind::concat, OpKind::inner};
}

std::string_view op_name(OpKind op) {
  switch (op) {
    case OpKind::multiply: return "multiply";
    case OpKind::plus: return "plus";
    case OpKind::minus: return "minus";
    case OpKind::min: return "min";
    case OpKind::max: return "max";
    case OpKind::concat: return "concat";
    case OpKind::inner: return "inner";
    case OpKind::conv: return "conv";
    case OpKind::outer: return "outer";
  }
  return "?";
}

OpKind parse_op(std::string_view name) {
  for (auto op : kAllOps)
    if (op_name(op) == name) return op;
  throw ConfigError("unknown operation '" + std::string(name) + "'");
}

std::vector<OpKind> parse_op_list(std::string_view s) {
  std::vector<OpKind> ops;
  while (!s.empty()) {
    const auto pos = s.find(',');
    const auto tok = s.substr(0, pos);
    if (!tok.empty()) ops.push_back(parse_op(tok));
    if (pos == std::string_view::npos) break;
    s.remove_prefix(pos + 1);
  }
  if (ops.empty()) throw ConfigError("empty operation list");
  return ops;
}

std::size_t output_dim(OpKind op, std::size_t k) {
  switch (op) {
    case OpKind::concat: return 2 * k;
    case OpKind::inner: return 1;
    case OpKind::outer: return k * k;
    default: return k;
  }
}

bool is_composable(OpKind op) {
  return op != OpKind::concat && op != OpKind::inner && op != OpKind::outer && op != OpKind::conv;
}

void apply(OpKind op, std::span<const double> a, std::span<const double> b, std::span<double> out) {
  check_inputs(op, a, b);
  const std::size_t k = a.size();
  check_length("output", out.size(), output_dim(op, k));
  switch (op) {
    case OpKind::multiply:
      for (std::size_t l = 0; l < k; ++l) out[l] = a[l] * b[l];
      break;
    case OpKind::plus:
      for (std::size_t l = 0; l < k; ++l) out[l] = a[l] + b[l];
      break;
    case OpKind::minus:
      for (std::size_t l = 0; l < k; ++l) out[l] = a[l] - b[l];
      break;
    case OpKind::min:
      for (std::size_t l = 0; l < k; ++l) out[l] = a[l] <= b[l] ? a[l] : b[l];
      break;
    case OpKind::max:
      for (std::size_t l = 0; l < k; ++l) out[l] = a[l] >= b[l] ? a[l] : b[l];
      break;
    case OpKind::concat:
      std::copy(a.begin(), a.end(), out.begin());
      std::copy(b.begin(), b.end(), out.begin() + static_cast<std::ptrdiff_t>(k));
      break;
    case OpKind::inner: {
      double acc = 0.0;
      for (std::size_t l = 0; l < k; ++l) acc += a[l] * b[l];
      out[0] = acc;
      break;
    }
    case OpKind::conv:
      // (a * b)_t = sum_s a_s b_{(t - s) mod k}
      for (std::size_t t = 0; t < k; ++t) {
        double acc = 0.0;
        for (std::size_t s = 0; s < k; ++s) acc += a[s] * b[(t + k - s) % k];
        out[t] = acc;
      }
      break;
    case OpKind::outer:
      for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = 0; j < k; ++j) out[i * k + j] = a[i] * b[j];
      break;
  }
}

void apply_adjoint(OpKind op, std::span<const double> a, std::span<const double> b,
                   std::span<const double> up, std::span<double> ga, std::span<double> gb) {
  check_inputs(op, a, b);
  const std::size_t k = a.size();
  check_length("upstream", up.size(), output_dim(op, k));
  check_length("grad_a", ga.size(), k);
  check_length("grad_b", gb.size(), k);
  switch (op) {
    case OpKind::multiply:
      for (std::size_t l = 0; l < k; ++l) {
        ga[l] = up[l] * b[l];
        gb[l] = up[l] * a[l];
      }
      break;
    case OpKind::plus:
      std::copy(up.begin(), up.end(), ga.begin());
      std::copy(up.begin(), up.end(), gb.begin());
      break;
    case OpKind::minus:
      for (std::size_t l = 0; l < k; ++l) {
        ga[l] = up[l];
        gb[l] = -up[l];
      }
      break;
    case OpKind::min:
      for (std::size_t l = 0; l < k; ++l) {
        const bool first = a[l] <= b[l];
        ga[l] = first ? up[l] : 0.0;
        gb[l] = first ? 0.0 : up[l];
      }
      break;
    case OpKind::max:
      for (std::size_t l = 0; l < k; ++l) {
        const bool first = a[l] >= b[l];
        ga[l] = first ? up[l] : 0.0;
        gb[l] = first ? 0.0 : up[l];
      }
      break;
    case OpKind::concat:
      std::copy(up.begin(), up.begin() + static_cast<std::ptrdiff_t>(k), ga.begin());
      std::copy(up.begin() + static_cast<std::ptrdiff_t>(k), up.end(), gb.begin());
      break;
    case OpKind::inner:
      for (std::size_t l = 0; l < k; ++l) {
        ga[l] = up[0] * b[l];
        gb[l] = up[0] * a[l];
      }
      break;
    case OpKind::conv:
      for (std::size_t s = 0; s < k; ++s) {
        double acc_a = 0.0, acc_b = 0.0;
        for (std::size_t t = 0; t < k; ++t) {
          acc_a += up[t] * b[(t + k - s) % k];
          acc_b += up[t] * a[(t + k - s) % k];
        }
        ga[s] = acc_a;
        gb[s] = acc_b;
      }
      break;
    case OpKind::outer:
      std::fill(gb.begin(), gb.end(), 0.0);
      for (std::size_t i = 0; i < k; ++i) {
        double acc = 0.0;
        for (std::size_t j = 0; j < k; ++j) {
          acc += up[i * k + j] * b[j];
          gb[j] += up[i * k + j] * a[i];
        }
        ga[i] = acc;
      }
      break;
  }
}

std::vector<double> apply(OpKind op, std::span<const double> a, std::span<const double> b) {
  check_inputs(op, a, b);
  std::vector<double> out(output_dim(op, a.size()));
  apply(op, a, b, out);
  return out;
}

std::pair<std::vector<double>, std::vector<double>> apply_adjoint(OpKind op, std::span<const double> a,
                                                                  std::span<const double> b,
                                                                  std::span<const double> upstream) {
  check_inputs(op, a, b);
  std::pair<std::vector<double>, std::vector<double>> g{std::vector<double>(a.size()),
                                                        std::vector<double>(a.size())};
  apply_adjoint(op, a, b, upstream, g.first, g.second);
  return g;
}

std::string TensorOp::name() const { return std::string(op_name(inner)) + "_" + std::string(op_name(outer)); }

TensorOp parse_tensor_op(std::string_view name) {
  const auto pos = name.find('_');
  if (pos == std::string_view::npos) throw ConfigError("tensor op '" + std::string(name) + "' must be inner_outer");
  TensorOp op{parse_op(name.substr(0, pos)), parse_op(name.substr(pos + 1))};
  if (!is_composable(op.inner) || !is_composable(op.outer))
    throw ConfigError("tensor composites require dimension-preserving ops");
  return op;
}

std::vector<TensorOp> enumerate_tensor_ops(std::span<const OpKind> base_ops) {
  for (auto op : base_ops)
    if (!is_composable(op))
      throw ConfigError("operation '" + std::string(op_name(op)) + "' changes dimension and cannot form a composite");
  std::vector<TensorOp> out;
  out.reserve(base_ops.size() * base_ops.size());
  for (auto inner : base_ops)
    for (auto outer : base_ops) out.push_back({inner, outer});
  return out;
}

std::vector<double> apply_tensor(const TensorOp& op, std::span<const double> u, std::span<const double> v,
                                 std::span<const double> s) {
  if (s.size() != u.size()) throw ConfigError("tensor operands differ in length");
  const auto t = apply(op.inner, u, v);
  return apply(op.outer, t, s);
}

TensorGrads apply_tensor_adjoint(const TensorOp& op, std::span<const double> u, std::span<const double> v,
                                 std::span<const double> s, std::span<const double> upstream) {
  if (s.size() != u.size()) throw ConfigError("tensor operands differ in length");
  const auto t = apply(op.inner, u, v);
  auto [gt, gs] = apply_adjoint(op.outer, t, s, upstream);
  auto [gu, gv] = apply_adjoint(op.inner, u, v, gt);
  return {std::move(gu), std::move(gv), std::move(gs)};
}

TensorOp Candidate::tensor_op() const {
  if (!second_) throw ConfigError("candidate '" + name() + "' is not a tensor composite");
  return {first_, *second_};
}

std::size_t Candidate::output_dim(std::size_t k) const { return is_tensor() ? k : sif::output_dim(first_, k); }

std::string Candidate::name() const {
  return is_tensor() ? TensorOp{first_, *second_}.name() : std::string(op_name(first_));
}

Candidate parse_candidate(std::string_view name) {
  if (name.find('_') != std::string_view::npos) return parse_tensor_op(name);
  return parse_op(name);
}

}  // namespace sif
