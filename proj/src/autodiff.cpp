#include "cgat/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "cgat/error.hpp"

namespace cgat {

Var Tape::constant(Tensor value) {
  if (!value.all_finite()) fail(ErrorCode::non_finite, "constant holds NaN/Inf");
  nodes_.push_back(Node{std::move(value), {}, false, nullptr, {}});
  return {nodes_.size() - 1};
}

Var Tape::param(Param& p) {
  nodes_.push_back(Node{p.value, {}, recording_, &p, {}});
  return {nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::initializer_list<Var> inputs, Backward backward) {
  if (!value.all_finite()) fail(ErrorCode::non_finite, "op produced NaN/Inf");
  bool needs = false;
  if (recording_) {
    for (Var in : inputs) needs = needs || nodes_[in.id].requires_grad;
  }
  nodes_.push_back(Node{std::move(value), {}, needs, nullptr, needs ? std::move(backward) : Backward{}});
  return {nodes_.size() - 1};
}

Tensor& Tape::grad(std::size_t id) {
  auto& node = nodes_[id];
  if (node.grad.size() != node.value.size() || node.grad.shape() != node.value.shape()) {
    node.grad = Tensor::zeros_like(node.value);
  }
  return node.grad;
}

void Tape::backward(Var loss) {
  if (value(loss).size() != 1) fail(ErrorCode::shape_mismatch, "backward() needs a scalar loss");
  if (!nodes_[loss.id].requires_grad) return;
  grad(loss).fill(1.0);
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (!node.requires_grad || node.grad.empty()) continue;
    if (node.param != nullptr) {
      auto& pg = node.param->grad;
      if (pg.shape() != node.value.shape()) pg = Tensor::zeros_like(node.value);
      pg.mat() += node.grad.mat();
    } else if (node.backward) {
      node.backward(*this, i);
    }
  }
}

EdgeIndex EdgeIndex::build(std::size_t num_nodes, std::vector<std::int32_t> source,
                           std::vector<std::int32_t> target) {
  if (source.size() != target.size()) fail(ErrorCode::shape_mismatch, "source/target length differ");
  EdgeIndex index;
  index.offsets.assign(num_nodes + 1, 0);
  const auto n = static_cast<std::int64_t>(num_nodes);
  for (std::size_t e = 0; e < target.size(); ++e) {
    if (source[e] < 0 || source[e] >= n || target[e] < 0 || target[e] >= n) {
      fail(ErrorCode::index_out_of_range, "edge endpoint outside [0, " + std::to_string(num_nodes) + ")");
    }
    if (e > 0 && target[e] < target[e - 1]) fail(ErrorCode::invalid_argument, "edges not sorted by target");
    ++index.offsets[static_cast<std::size_t>(target[e]) + 1];
  }
  for (std::size_t i = 0; i < num_nodes; ++i) index.offsets[i + 1] += index.offsets[i];
  index.source = std::move(source);
  index.target = std::move(target);
  return index;
}

EdgeIndex EdgeIndex::from_targets(std::size_t num_nodes, std::vector<std::int32_t> target) {
  auto source = target;
  return build(num_nodes, std::move(source), std::move(target));
}

GradCheckResult grad_check(const ScalarFn& fn, std::span<Param* const> params, double h,
                           double denom_floor) {
  for (Param* p : params) p->grad = Tensor::zeros_like(p->value);
  {
    Tape tape;
    std::vector<Var> vars;
    for (Param* p : params) vars.push_back(tape.param(*p));
    Var out = fn(tape, vars);
    tape.backward(out);
  }

  auto evaluate = [&]() {
    Tape tape(false);
    std::vector<Var> vars;
    for (Param* p : params) vars.push_back(tape.param(*p));
    return tape.value(fn(tape, vars))[0];
  };

  GradCheckResult result;
  for (Param* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double up = evaluate();
      p->value[i] = saved - h;
      const double down = evaluate();
      p->value[i] = saved;
      const double numeric = (up - down) / (2.0 * h);
      const double analytic = p->grad[i];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), denom_floor});
      const double err = std::abs(analytic - numeric) / denom;
      if (err > result.max_rel_error || result.worst_param.empty()) {
        if (err >= result.max_rel_error) {
          result = {err, p->name, i, analytic, numeric};
        }
      }
    }
  }
  return result;
}

}  // namespace cgat
