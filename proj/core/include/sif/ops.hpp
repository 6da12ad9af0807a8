#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace sif {

/// Vector-wise interaction operations combining two embeddings.
enum class OpKind { multiply, plus, minus, min, max, concat, inner, conv, outer };

inline constexpr OpKind kAllOps[] = {OpKind::multiply, OpKind::plus,  OpKind::minus,
                                     OpKind::min,      OpKind::max,   OpKind::concat,
                                     OpKind::inner,    OpKind::conv,  OpKind::outer};

/// Candidates searched by default.
std::vector<OpKind> default_search_ops();

std::string_view op_name(OpKind op);
OpKind parse_op(std::string_view name);
std::vector<OpKind> parse_op_list(std::string_view comma_separated);

std::size_t output_dim(OpKind op, std::size_t k);
/// Elementwise ops usable inside tensor composites (conv is excluded).
bool is_composable(OpKind op);

// Span versions write into caller-owned storage and throw ConfigError on
// length mismatch. min/max ties route the gradient to the first argument.
void apply(OpKind op, std::span<const double> a, std::span<const double> b, std::span<double> out);
void apply_adjoint(OpKind op, std::span<const double> a, std::span<const double> b,
                   std::span<const double> upstream, std::span<double> grad_a, std::span<double> grad_b);

std::vector<double> apply(OpKind op, std::span<const double> a, std::span<const double> b);
std::pair<std::vector<double>, std::vector<double>> apply_adjoint(OpKind op, std::span<const double> a,
                                                                  std::span<const double> b,
                                                                  std::span<const double> upstream);

/// o_outer(o_inner(u, v), s) for third-order data.
struct TensorOp {
  OpKind inner = OpKind::multiply;
  OpKind outer = OpKind::multiply;

  std::string name() const;
  friend bool operator==(const TensorOp&, const TensorOp&) = default;
};

TensorOp parse_tensor_op(std::string_view name);

/// All ordered (inner, outer) pairs over dimension-preserving base ops.
std::vector<TensorOp> enumerate_tensor_ops(std::span<const OpKind> base_ops);

std::vector<double> apply_tensor(const TensorOp& op, std::span<const double> u, std::span<const double> v,
                                 std::span<const double> s);

struct TensorGrads {
  std::vector<double> u, v, s;
};
TensorGrads apply_tensor_adjoint(const TensorOp& op, std::span<const double> u, std::span<const double> v,
                                 std::span<const double> s, std::span<const double> upstream);

/// A searchable candidate: a matrix op, or a tensor composite.
class Candidate {
 public:
  Candidate(OpKind op) : first_(op) {}  // NOLINT(google-explicit-constructor)
  Candidate(TensorOp op) : first_(op.inner), second_(op.outer) {}  // NOLINT(google-explicit-constructor)

  bool is_tensor() const noexcept { return second_.has_value(); }
  int arity() const noexcept { return is_tensor() ? 3 : 2; }
  OpKind op() const noexcept { return first_; }
  TensorOp tensor_op() const;
  std::size_t output_dim(std::size_t k) const;
  std::string name() const;

  friend bool operator==(const Candidate&, const Candidate&) = default;

 private:
  OpKind first_;
  std::optional<OpKind> second_;
};

/// Accepts "max" or "max_multiply".
Candidate parse_candidate(std::string_view name);

}  // namespace sif
