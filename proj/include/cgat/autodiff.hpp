#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "cgat/tensor.hpp"

namespace cgat {

/// Handle to a value recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

/// Reverse-mode tape. Every op appends one node holding its output value
/// and, when any input needs a gradient, a closure that pushes the output
/// gradient back to its inputs. A tape belongs to one thread.
class Tape {
 public:
  using Backward = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(bool record_gradients = true) : recording_(record_gradients) {}

  Var constant(Tensor value);
  /// Leaf bound to a parameter; backward() adds into `param.grad`.
  Var param(Param& param);

  /// Appends an op output. Throws NonFinite if `value` holds NaN/Inf.
  Var record(Tensor value, std::initializer_list<Var> inputs, Backward backward);

  const Tensor& value(Var v) const { return nodes_[v.id].value; }
  const Tensor& value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  /// Gradient buffer of a node, allocated (zeroed) on first use.
  Tensor& grad(Var v) { return grad(v.id); }
  Tensor& grad(std::size_t id);
  bool has_grad(Var v) const { return !nodes_[v.id].grad.empty() || nodes_[v.id].value.empty(); }

  /// Seeds d(loss)/d(loss) = 1 and runs all closures in reverse order.
  void backward(Var loss);

  bool recording() const { return recording_; }
  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    Param* param = nullptr;
    Backward backward;
  };

  std::vector<Node> nodes_;
  bool recording_;
};

/// Edges sorted by target, with per-target segment offsets: the incoming
/// edges of node t are [offsets[t], offsets[t+1]). Ops keep a reference to
/// the index, so it must outlive any backward() over the tape.
struct EdgeIndex {
  std::vector<std::int32_t> source;
  std::vector<std::int32_t> target;
  std::vector<std::size_t> offsets;

  std::size_t num_edges() const { return target.size(); }
  std::size_t num_nodes() const { return offsets.empty() ? 0 : offsets.size() - 1; }

  /// Validates ordering and endpoint range.
  static EdgeIndex build(std::size_t num_nodes, std::vector<std::int32_t> source,
                         std::vector<std::int32_t> target);
  /// Segments only (sources set equal to targets); for softmax/scatter ops.
  static EdgeIndex from_targets(std::size_t num_nodes, std::vector<std::int32_t> target);
};

enum class Activation { gelu, leaky_relu };

namespace ad {

inline constexpr double kLeakySlope = 0.2;
inline constexpr double kLayerNormEps = 1e-5;

Var matmul(Tape& t, Var a, Var b);
/// y = x W + bias (bias broadcast over rows; bias may be [b] or [1 x b]).
Var linear(Tape& t, Var x, Var w, Var bias);
Var add(Tape& t, Var a, Var b);
Var add_bias(Tape& t, Var x, Var bias);
Var scale(Tape& t, Var x, double factor);

Var gelu(Tape& t, Var x);
Var leaky_relu(Tape& t, Var x, double slope = kLeakySlope);
Var activation(Tape& t, Var x, Activation kind, double slope = kLeakySlope);

/// Row-wise standardization (biased variance, eps inside the square root),
/// then per-column gain and bias.
Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps = kLayerNormEps);

/// Softmax over each target's incoming edges, independently per column.
/// `scores` is [E] or [E x K]. Throws EmptySegment for a node without
/// incoming edges.
Var segment_softmax(Tape& t, Var scores, const EdgeIndex& edges);

/// out[t] = sum over edges e into t of weights[e] * values[e]; `values` is
/// [E x F], `weights` is [E]. Nodes without incoming edges get zero rows.
Var scatter_weighted_sum(Tape& t, Var values, Var weights, const EdgeIndex& edges);

/// Multi-head message passing without materializing per-edge rows:
/// out[t, k*F + f] = sum_e weights[e, k] * node_values[source(e), k*F + f].
/// `node_values` is [N x K*F], `weights` is [E x K].
Var multihead_aggregate(Tape& t, Var node_values, Var weights, const EdgeIndex& edges, std::size_t heads);

/// Dynamic (GATv2) scores per edge and head:
/// e[e, k] = att[k] . LeakyReLU(src[source(e), k] + dst[target(e), k])
/// where src/dst are [N x K*F] head-blocked projections and att is [K x F].
Var gatv2_scores(Tape& t, Var src, Var dst, Var att, const EdgeIndex& edges, std::size_t heads,
                 double slope = kLeakySlope);

/// Static (GAT) scores: e[e, k] = LeakyReLU(att_dst[k] . x[target, k] + att_src[k] . x[source, k]).
Var static_gat_scores(Tape& t, Var projected, Var att_dst, Var att_src, const EdgeIndex& edges,
                      std::size_t heads, double slope = kLeakySlope);

/// [N x K*F] -> [N x F], elementwise max over heads; ties go to the lowest head.
Var head_max_pool(Tape& t, Var x, std::size_t heads);
Var head_mean_pool(Tape& t, Var x, std::size_t heads);

Var gather_rows(Tape& t, Var x, std::span<const std::int32_t> rows);
/// Copy of `base` whose listed rows are replaced by the single row `row`.
Var overwrite_rows(Tape& t, Var base, Var row, std::span<const std::int32_t> rows);
/// Mean of rows per group; empty groups give zero rows.
Var segment_mean(Tape& t, Var x, std::span<const std::int32_t> group, std::size_t num_groups);

/// Inverted dropout; identity when !training or p == 0.
Var dropout(Tape& t, Var x, double p, bool training, std::mt19937_64& rng);

/// Mean over the batch of -log softmax(logits)[label].
Var softmax_cross_entropy(Tape& t, Var logits, std::span<const int> labels);

Var sum(Tape& t, Var x);
/// sum(coeffs .* x); a scalar probe for gradient checks of non-scalar ops.
Var weighted_sum(Tape& t, Var x, const Tensor& coeffs);

}  // namespace ad

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

/// Builds a scalar from the bound parameter vars; called once per probe.
using ScalarFn = std::function<Var(Tape&, std::span<const Var>)>;

/// Central-difference check of every coordinate of every parameter.
/// Relative error is |a - n| / max(|a|, |n|, denom_floor).
GradCheckResult grad_check(const ScalarFn& fn, std::span<Param* const> params, double h = 1e-6,
                           double denom_floor = 1e-5);

}  // namespace cgat
