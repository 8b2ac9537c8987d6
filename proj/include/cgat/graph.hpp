#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cgat/autodiff.hpp"
#include "cgat/mesh.hpp"
#include "cgat/tensor.hpp"

namespace cgat {

/// Directed graph with node features. Edges are kept sorted by (target, source).
struct Graph {
  Tensor x;  // N x d_in
  std::vector<std::int32_t> source;
  std::vector<std::int32_t> target;

  std::size_t num_nodes() const { return x.rank() == 0 ? 0 : x.rows(); }
  std::size_t num_edges() const { return target.size(); }
  std::size_t feature_width() const { return x.rank() < 2 ? 0 : x.cols(); }

  bool operator==(const Graph&) const = default;
};

enum class ClsMode { directed, undirected };

std::string to_string(ClsMode mode);
ClsMode parse_cls_mode(const std::string& text);

/// Graph plus self-loops and, optionally, the CLS node appended at index N.
/// Without a CLS node (`cls_mode` empty) only self-loops are added; this is
/// the input form of the mean-readout baselines.
struct AugmentedGraph {
  Graph base;
  std::optional<ClsMode> cls_mode;
  std::vector<std::int32_t> source;  // augmented edge list, sorted by (target, source)
  std::vector<std::int32_t> target;

  bool has_cls() const { return cls_mode.has_value(); }
  std::int32_t cls_index() const { return has_cls() ? static_cast<std::int32_t>(base.num_nodes()) : -1; }
  std::size_t num_nodes() const { return base.num_nodes() + (has_cls() ? 1 : 0); }
  std::size_t num_edges() const { return target.size(); }

  bool operator==(const AugmentedGraph&) const = default;
};

/// Unique undirected mesh edges as (a, b) with a < b, sorted.
std::vector<std::pair<std::int32_t, std::int32_t>> mesh_edges(const Mesh& mesh);

/// Both directions of every mesh edge. Throws FeatureLengthMismatch when the
/// feature rows do not match the vertex count.
Graph mesh_to_graph(const Mesh& mesh, const Tensor& features);

/// Builds a graph from an explicit edge list (duplicates removed, sorted).
Graph make_graph(Tensor x, std::span<const std::pair<std::int32_t, std::int32_t>> edges);

AugmentedGraph augment_with_cls(const Graph& graph, ClsMode mode);
AugmentedGraph add_self_loops(const Graph& graph);

/// Block-diagonal union of augmented graphs. CLS rows of `x` are zero
/// placeholders; the model writes the learned CLS embedding there.
struct GraphBatch {
  Tensor x;  // total nodes x d_in
  EdgeIndex edges;
  std::optional<ClsMode> cls_mode;
  std::vector<std::int32_t> graph_id;  // per node
  std::vector<std::size_t> node_offsets;  // num_graphs + 1
  std::vector<std::size_t> edge_offsets;  // num_graphs + 1
  std::vector<std::int32_t> cls_indices;  // one per graph when CLS is present
  // Original edges of every member, kept so unbatch is exact.
  std::vector<std::int32_t> base_source;
  std::vector<std::int32_t> base_target;
  std::vector<std::size_t> base_edge_offsets;

  std::size_t num_graphs() const { return node_offsets.empty() ? 0 : node_offsets.size() - 1; }
  std::size_t num_nodes() const { return graph_id.size(); }
  bool has_cls() const { return cls_mode.has_value(); }
};

/// Throws MixedModeBatch / MixedFeatureWidth on inconsistent members.
GraphBatch batch(std::span<const AugmentedGraph> graphs);
GraphBatch batch(const AugmentedGraph& graph);
std::vector<AugmentedGraph> unbatch(const GraphBatch& batch);

}  // namespace cgat
