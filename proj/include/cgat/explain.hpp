#pragma once

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include "json.hpp"

#include "cgat/model.hpp"

namespace cgat {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class RolloutHeadMerge { mean, max };

std::string to_string(RolloutHeadMerge m);
RolloutHeadMerge parse_rollout_head_merge(const std::string& text);

/// Entry (target, source) holds the head-merged weight of edge source -> target.
/// `weights` is [E x K] aligned with `source`/`target`. Throws
/// InconsistentEdges on length mismatch or endpoints outside [0, size).
SparseMatrix build_attention_matrix(const Tensor& weights, std::span<const std::int32_t> source,
                                    std::span<const std::int32_t> target, std::size_t size,
                                    RolloutHeadMerge merge = RolloutHeadMerge::mean);

/// (A + I), row-normalized to row sums of 1 when `renormalize` is set.
SparseMatrix rollout_factor(const SparseMatrix& a, bool renormalize);

/// R = (A_{L-1} + I) ... (A_1 + I)(A_0 + I). Throws DimensionMismatch.
Eigen::MatrixXd attention_rollout(std::span<const SparseMatrix> matrices, bool renormalize);

/// Row `row` of the rollout without forming the full product.
Eigen::VectorXd rollout_row(std::span<const SparseMatrix> matrices, bool renormalize, std::size_t row);

/// CLS row of the rollout with the CLS self-entry dropped (length n).
std::vector<double> cls_scores(const Eigen::MatrixXd& rollout, std::size_t cls_index);
std::vector<double> cls_scores(const Eigen::VectorXd& cls_row, std::size_t cls_index);

struct ClippedScores {
  std::vector<std::vector<double>> scores;
  double lo = 0.0;
  double hi = 0.0;
};

/// Shared display range over all samples: lo = min, hi = mean + min of the
/// concatenated scores; every value is clamped into [lo, hi].
ClippedScores clip_for_display(const std::vector<std::vector<double>>& score_sets);

/// Per-block attention matrices of one batch member in its local node order.
std::vector<SparseMatrix> sample_attention_matrices(const ForwardResult& result, const GraphBatch& batch,
                                                    std::size_t sample, RolloutHeadMerge merge);

struct ExplainOptions {
  bool renormalize = true;
  RolloutHeadMerge head_merge = RolloutHeadMerge::mean;
};

/// CLS -> node rollout scores for every graph in the batch (unclipped).
std::vector<std::vector<double>> explain_batch(const Model& model, const GraphBatch& batch,
                                               const ExplainOptions& options = {});

/// Structured sidecar describing an exported explanation.
nlohmann::json explanation_sidecar(const ClippedScores& clipped, const ExplainOptions& options,
                                   const std::string& checkpoint_hash);

}  // namespace cgat
