#pragma once

#include <random>
#include <span>
#include <string>
#include <vector>

#include "cgat/autodiff.hpp"
#include "cgat/graph.hpp"
#include "cgat/mesh_process.hpp"
#include "cgat/tensor.hpp"

namespace cgat {

enum class Architecture { cgat, gcn_mean, gat_mean };
enum class AttentionKind { static_gat, dynamic_gatv2 };
enum class HeadMerge { max, mean, concat };

std::string to_string(Architecture a);
std::string to_string(AttentionKind a);
std::string to_string(HeadMerge m);
Architecture parse_architecture(const std::string& text);
AttentionKind parse_attention_kind(const std::string& text);  // "static" / "dynamic"
HeadMerge parse_head_merge(const std::string& text);

struct ModelConfig {
  Architecture architecture = Architecture::cgat;
  int blocks = 6;
  int heads = 8;
  int hidden = 128;
  FeatureChannels features = FeatureChannels::both;
  ClsMode cls_mode = ClsMode::directed;
  AttentionKind attention = AttentionKind::dynamic_gatv2;
  HeadMerge head_merge = HeadMerge::max;
  bool head_bias = true;
  int classes = 5;
  double dropout = 0.3;

  std::size_t input_width() const { return channel_count(features); }
  bool uses_cls() const { return architecture == Architecture::cgat; }
  bool operator==(const ModelConfig&) const = default;
};

/// Throws InvalidConfig when a field is out of range.
void validate(const ModelConfig& config);

/// Short label such as "6-CGAT→-both", "3-CGAT↔-curv" or "6-GAT-mean-both".
std::string model_name(const ModelConfig& config);

struct Model {
  ModelConfig config;
  ParamStore params;
};

/// Glorot-uniform weights, zero biases, unit LayerNorm gains.
Model init_model(const ModelConfig& config, std::uint64_t seed);

/// Softmax-normalized attention of one block, [E x K] aligned with the
/// batch edge list.
struct AttentionRecord {
  int block = 0;
  Tensor weights;
};

/// Tape handles of one forward pass.
struct ForwardVars {
  Var logits;
  std::vector<Var> attention;  // one per block; empty for the GCN baseline
  std::vector<Var> hidden;     // block outputs H^(1..L)
};

/// Parameters as trainable leaves (gradients flow into Param::grad).
std::vector<Var> bind_params(Tape& tape, Model& model);
/// Parameters as constants, for inference on a shared model.
std::vector<Var> bind_constants(Tape& tape, const Model& model);

/// Full forward pass on a batch. `params` must come from bind_params or
/// bind_constants on the same model. Throws ConfigMismatch when the batch
/// does not fit the configuration and CLSNodePresent when a baseline is
/// given CLS-augmented graphs.
ForwardVars forward(Tape& tape, const Model& model, std::span<const Var> params, const GraphBatch& batch,
                    bool training, std::mt19937_64& rng);

struct ForwardResult {
  Tensor logits;  // B x C
  std::vector<AttentionRecord> attention;
  std::vector<Tensor> hidden;
};

/// Inference-mode forward (no dropout, no gradients).
ForwardResult forward(const Model& model, const GraphBatch& batch);

struct Prediction {
  Tensor probabilities;  // B x C
  std::vector<int> labels;
};

Prediction predict(const Model& model, const GraphBatch& batch);
/// Row-wise softmax with argmax labels (ties to the lowest index).
Prediction softmax_predict(const Tensor& logits);

/// Raw attention scores of one block before the softmax, [E x K].
Tensor attention_scores(const Model& model, int block, const Tensor& h, const EdgeIndex& edges);

/// Symmetric normalization 1/sqrt(deg_s * deg_t) per edge, degrees counted
/// on the given (self-looped) edge list.
Tensor gcn_coefficients(const EdgeIndex& edges);

/// Graph input form expected by the configuration: CLS-augmented for CGAT,
/// self-loops only for the baselines.
AugmentedGraph prepare_graph(const ModelConfig& config, const Graph& graph);

}  // namespace cgat
