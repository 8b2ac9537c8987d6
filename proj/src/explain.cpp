#include <algorithm>
#include <numeric>

#include "cgat/error.hpp"
#include "cgat/explain.hpp"

namespace cgat {

std::string to_string(RolloutHeadMerge m) {
  return m == RolloutHeadMerge::mean ? "mean" : "max";
}

RolloutHeadMerge parse_rollout_head_merge(const std::string& text) {
  if (text == "mean") return RolloutHeadMerge::mean;
  if (text == "max") return RolloutHeadMerge::max;
  fail(ErrorCode::invalid_config, "unknown rollout head merge '" + text + "'");
}

SparseMatrix build_attention_matrix(const Tensor& weights, std::span<const std::int32_t> source,
                                    std::span<const std::int32_t> target, std::size_t size,
                                    RolloutHeadMerge merge) {
  if (source.size() != target.size() || weights.rank() == 0 || weights.rows() != source.size()) {
    fail(ErrorCode::inconsistent_edges, "attention weights do not match the edge list");
  }
  const std::size_t heads = weights.cols();
  std::vector<Eigen::Triplet<double>> entries;
  entries.reserve(source.size());
  for (std::size_t e = 0; e < source.size(); ++e) {
    if (source[e] < 0 || target[e] < 0 || std::size_t(source[e]) >= size || std::size_t(target[e]) >= size) {
      fail(ErrorCode::inconsistent_edges, "edge endpoint outside the attention matrix");
    }
    const double* w = weights.data() + e * heads;
    const double value = merge == RolloutHeadMerge::mean ? std::accumulate(w, w + heads, 0.0) / double(heads)
                                                         : *std::max_element(w, w + heads);
    entries.emplace_back(target[e], source[e], value);
  }
  SparseMatrix a(static_cast<Eigen::Index>(size), static_cast<Eigen::Index>(size));
  a.setFromTriplets(entries.begin(), entries.end());
  return a;
}

SparseMatrix rollout_factor(const SparseMatrix& a, bool renormalize) {
  SparseMatrix identity(a.rows(), a.cols());
  identity.setIdentity();
  SparseMatrix f = a + identity;
  if (renormalize) {
    for (Eigen::Index r = 0; r < f.outerSize(); ++r) {
      double total = 0.0;
      for (SparseMatrix::InnerIterator it(f, r); it; ++it) total += it.value();
      for (SparseMatrix::InnerIterator it(f, r); it; ++it) it.valueRef() /= total;
    }
  }
  return f;
}

namespace {

void check_square(std::span<const SparseMatrix> matrices) {
  if (matrices.empty()) fail(ErrorCode::dimension_mismatch, "rollout needs at least one matrix");
  const auto n = matrices.front().rows();
  for (const auto& m : matrices) {
    if (m.rows() != n || m.cols() != n) fail(ErrorCode::dimension_mismatch, "attention matrices differ in size");
  }
}

}  // namespace

Eigen::MatrixXd attention_rollout(std::span<const SparseMatrix> matrices, bool renormalize) {
  check_square(matrices);
  Eigen::MatrixXd r = Eigen::MatrixXd(rollout_factor(matrices.front(), renormalize));
  for (std::size_t l = 1; l < matrices.size(); ++l) {
    const Eigen::MatrixXd next = rollout_factor(matrices[l], renormalize) * r;
    r = next;
  }
  return r;
}

Eigen::VectorXd rollout_row(std::span<const SparseMatrix> matrices, bool renormalize, std::size_t row) {
  check_square(matrices);
  if (static_cast<Eigen::Index>(row) >= matrices.front().rows()) {
    fail(ErrorCode::dimension_mismatch, "rollout row outside the matrix");
  }
  Eigen::VectorXd v = Eigen::VectorXd::Zero(matrices.front().rows());
  v[static_cast<Eigen::Index>(row)] = 1.0;
  for (std::size_t l = matrices.size(); l-- > 0;) {
    const Eigen::VectorXd next = rollout_factor(matrices[l], renormalize).transpose() * v;
    v = next;
  }
  return v;
}

std::vector<double> cls_scores(const Eigen::VectorXd& cls_row, std::size_t cls_index) {
  std::vector<double> out;
  out.reserve(cls_row.size());
  for (Eigen::Index i = 0; i < cls_row.size(); ++i) {
    if (static_cast<std::size_t>(i) != cls_index) out.push_back(cls_row[i]);
  }
  return out;
}

std::vector<double> cls_scores(const Eigen::MatrixXd& rollout, std::size_t cls_index) {
  if (static_cast<Eigen::Index>(cls_index) >= rollout.rows()) {
    fail(ErrorCode::dimension_mismatch, "CLS index outside the rollout matrix");
  }
  return cls_scores(Eigen::VectorXd(rollout.row(static_cast<Eigen::Index>(cls_index)).transpose()), cls_index);
}

ClippedScores clip_for_display(const std::vector<std::vector<double>>& score_sets) {
  double lo = std::numeric_limits<double>::infinity();
  double total = 0.0;
  std::size_t count = 0;
  for (const auto& set : score_sets) {
    for (double s : set) {
      lo = std::min(lo, s);
      total += s;
      ++count;
    }
  }
  if (count == 0) fail(ErrorCode::invalid_argument, "no scores to clip");
  ClippedScores out;
  out.lo = lo;
  out.hi = total / static_cast<double>(count) + lo;
  for (const auto& set : score_sets) {
    auto& clipped = out.scores.emplace_back();
    clipped.reserve(set.size());
    for (double s : set) clipped.push_back(std::clamp(s, out.lo, out.hi));
  }
  return out;
}

std::vector<SparseMatrix> sample_attention_matrices(const ForwardResult& result, const GraphBatch& batch,
                                                    std::size_t sample, RolloutHeadMerge merge) {
  if (sample >= batch.num_graphs()) fail(ErrorCode::invalid_argument, "sample index outside the batch");
  const std::size_t first_edge = batch.edge_offsets[sample];
  const std::size_t last_edge = batch.edge_offsets[sample + 1];
  const auto shift = static_cast<std::int32_t>(batch.node_offsets[sample]);
  const std::size_t size = batch.node_offsets[sample + 1] - batch.node_offsets[sample];
  std::vector<std::int32_t> source, target;
  for (std::size_t e = first_edge; e < last_edge; ++e) {
    source.push_back(batch.edges.source[e] - shift);
    target.push_back(batch.edges.target[e] - shift);
  }
  std::vector<SparseMatrix> out;
  for (const auto& record : result.attention) {
    if (record.weights.rank() != 2 || record.weights.rows() != batch.edges.num_edges()) {
      fail(ErrorCode::inconsistent_edges, "attention record does not match the batch");
    }
    const std::size_t heads = record.weights.cols();
    std::vector<double> slice(record.weights.data() + first_edge * heads,
                              record.weights.data() + last_edge * heads);
    out.push_back(build_attention_matrix(Tensor({last_edge - first_edge, heads}, std::move(slice)), source,
                                         target, size, merge));
  }
  return out;
}

std::vector<std::vector<double>> explain_batch(const Model& model, const GraphBatch& batch,
                                               const ExplainOptions& options) {
  if (!batch.has_cls()) fail(ErrorCode::invalid_argument, "explanations need CLS-augmented graphs");
  const ForwardResult result = forward(model, batch);
  std::vector<std::vector<double>> out;
  for (std::size_t s = 0; s < batch.num_graphs(); ++s) {
    const auto matrices = sample_attention_matrices(result, batch, s, options.head_merge);
    const std::size_t cls = batch.cls_indices[s] - batch.node_offsets[s];
    out.push_back(cls_scores(rollout_row(matrices, options.renormalize, cls), cls));
  }
  return out;
}

nlohmann::json explanation_sidecar(const ClippedScores& clipped, const ExplainOptions& options,
                                   const std::string& checkpoint_hash) {
  return {{"lo", clipped.lo},
          {"hi", clipped.hi},
          {"head_merge", to_string(options.head_merge)},
          {"renormalize", options.renormalize},
          {"checkpoint_sha256", checkpoint_hash}};
}

}  // namespace cgat
