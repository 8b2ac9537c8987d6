#include <algorithm>
#include <numeric>

#include "cgat/error.hpp"
#include "cgat/graph.hpp"

namespace cgat {

namespace {

using EdgePair = std::pair<std::int32_t, std::int32_t>;  // (source, target)

void sort_by_target(std::vector<EdgePair>& edges) {
  std::sort(edges.begin(), edges.end(), [](const EdgePair& a, const EdgePair& b) {
    return a.second != b.second ? a.second < b.second : a.first < b.first;
  });
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
}

void split_pairs(const std::vector<EdgePair>& edges, std::vector<std::int32_t>& source,
                 std::vector<std::int32_t>& target) {
  source.resize(edges.size());
  target.resize(edges.size());
  for (std::size_t e = 0; e < edges.size(); ++e) {
    source[e] = edges[e].first;
    target[e] = edges[e].second;
  }
}

std::vector<EdgePair> base_pairs(const Graph& graph) {
  std::vector<EdgePair> edges(graph.num_edges());
  for (std::size_t e = 0; e < edges.size(); ++e) edges[e] = {graph.source[e], graph.target[e]};
  return edges;
}

}  // namespace

std::string to_string(ClsMode mode) {
  return mode == ClsMode::directed ? "directed" : "undirected";
}

ClsMode parse_cls_mode(const std::string& text) {
  if (text == "directed") return ClsMode::directed;
  if (text == "undirected") return ClsMode::undirected;
  fail(ErrorCode::invalid_config, "unknown CLS mode '" + text + "'");
}

std::vector<EdgePair> mesh_edges(const Mesh& mesh) {
  std::vector<EdgePair> edges;
  edges.reserve(mesh.faces.size() * 3);
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      auto a = f[k];
      auto b = f[(k + 1) % 3];
      if (a > b) std::swap(a, b);
      edges.emplace_back(a, b);
    }
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  return edges;
}

Graph make_graph(Tensor x, std::span<const EdgePair> edges) {
  if (x.rank() != 2) fail(ErrorCode::shape_mismatch, "node features must be a matrix");
  const auto n = static_cast<std::int32_t>(x.rows());
  std::vector<EdgePair> sorted(edges.begin(), edges.end());
  for (const auto& [s, t] : sorted) {
    if (s < 0 || t < 0 || s >= n || t >= n) fail(ErrorCode::index_out_of_range, "edge endpoint outside graph");
  }
  sort_by_target(sorted);
  Graph g{std::move(x), {}, {}};
  split_pairs(sorted, g.source, g.target);
  return g;
}

Graph mesh_to_graph(const Mesh& mesh, const Tensor& features) {
  if (features.rank() != 2 || features.rows() != mesh.num_vertices()) {
    fail(ErrorCode::feature_length_mismatch, "expected " + std::to_string(mesh.num_vertices()) +
                                                 " feature rows, got " +
                                                 std::to_string(features.rank() ? features.rows() : 0));
  }
  std::vector<EdgePair> directed;
  for (const auto& [a, b] : mesh_edges(mesh)) {
    directed.emplace_back(a, b);
    directed.emplace_back(b, a);
  }
  return make_graph(features, directed);
}

AugmentedGraph add_self_loops(const Graph& graph) {
  auto edges = base_pairs(graph);
  const auto n = static_cast<std::int32_t>(graph.num_nodes());
  for (std::int32_t i = 0; i < n; ++i) edges.emplace_back(i, i);
  sort_by_target(edges);
  AugmentedGraph out{graph, std::nullopt, {}, {}};
  split_pairs(edges, out.source, out.target);
  return out;
}

AugmentedGraph augment_with_cls(const Graph& graph, ClsMode mode) {
  auto edges = base_pairs(graph);
  const auto n = static_cast<std::int32_t>(graph.num_nodes());
  for (std::int32_t i = 0; i < n; ++i) {
    edges.emplace_back(i, i);
    edges.emplace_back(i, n);
    if (mode == ClsMode::undirected) edges.emplace_back(n, i);
  }
  sort_by_target(edges);
  AugmentedGraph out{graph, mode, {}, {}};
  split_pairs(edges, out.source, out.target);
  return out;
}

GraphBatch batch(std::span<const AugmentedGraph> graphs) {
  if (graphs.empty()) fail(ErrorCode::invalid_argument, "cannot batch zero graphs");
  const auto mode = graphs.front().cls_mode;
  const std::size_t width = graphs.front().base.feature_width();
  std::size_t total_nodes = 0;
  std::size_t total_edges = 0;
  std::size_t total_base_edges = 0;
  for (const auto& g : graphs) {
    if (g.cls_mode != mode) fail(ErrorCode::mixed_mode_batch, "batch members disagree on CLS mode");
    if (g.base.feature_width() != width) {
      fail(ErrorCode::mixed_feature_width, "batch members disagree on feature width");
    }
    total_nodes += g.num_nodes();
    total_edges += g.num_edges();
    total_base_edges += g.base.num_edges();
  }

  GraphBatch b;
  b.cls_mode = mode;
  b.x = Tensor({total_nodes, width});
  b.graph_id.reserve(total_nodes);
  b.node_offsets.push_back(0);
  b.edge_offsets.push_back(0);
  b.base_edge_offsets.push_back(0);
  std::vector<std::int32_t> source, target;
  source.reserve(total_edges);
  target.reserve(total_edges);
  b.base_source.reserve(total_base_edges);
  b.base_target.reserve(total_base_edges);
  for (std::size_t gi = 0; gi < graphs.size(); ++gi) {
    const auto& g = graphs[gi];
    const std::size_t offset = b.node_offsets.back();
    const auto shift = static_cast<std::int32_t>(offset);
    const double* xs = g.base.x.data();
    std::copy(xs, xs + g.base.x.size(), b.x.data() + offset * width);
    b.graph_id.insert(b.graph_id.end(), g.num_nodes(), static_cast<std::int32_t>(gi));
    for (std::size_t e = 0; e < g.num_edges(); ++e) {
      source.push_back(g.source[e] + shift);
      target.push_back(g.target[e] + shift);
    }
    b.base_source.insert(b.base_source.end(), g.base.source.begin(), g.base.source.end());
    b.base_target.insert(b.base_target.end(), g.base.target.begin(), g.base.target.end());
    if (g.has_cls()) b.cls_indices.push_back(g.cls_index() + shift);
    b.node_offsets.push_back(offset + g.num_nodes());
    b.edge_offsets.push_back(source.size());
    b.base_edge_offsets.push_back(b.base_source.size());
  }
  b.edges = EdgeIndex::build(total_nodes, std::move(source), std::move(target));
  return b;
}

GraphBatch batch(const AugmentedGraph& graph) {
  return batch(std::span<const AugmentedGraph>(&graph, 1));
}

std::vector<AugmentedGraph> unbatch(const GraphBatch& b) {
  std::vector<AugmentedGraph> out;
  const std::size_t width = b.x.cols();
  for (std::size_t gi = 0; gi < b.num_graphs(); ++gi) {
    const std::size_t first = b.node_offsets[gi];
    const std::size_t nodes = b.node_offsets[gi + 1] - first;
    const std::size_t base_nodes = nodes - (b.has_cls() ? 1 : 0);
    AugmentedGraph g;
    g.cls_mode = b.cls_mode;
    std::vector<double> xs(b.x.data() + first * width, b.x.data() + (first + base_nodes) * width);
    g.base.x = Tensor({base_nodes, width}, std::move(xs));
    g.base.source.assign(b.base_source.begin() + b.base_edge_offsets[gi],
                         b.base_source.begin() + b.base_edge_offsets[gi + 1]);
    g.base.target.assign(b.base_target.begin() + b.base_edge_offsets[gi],
                         b.base_target.begin() + b.base_edge_offsets[gi + 1]);
    const auto shift = static_cast<std::int32_t>(first);
    for (std::size_t e = b.edge_offsets[gi]; e < b.edge_offsets[gi + 1]; ++e) {
      g.source.push_back(b.edges.source[e] - shift);
      g.target.push_back(b.edges.target[e] - shift);
    }
    out.push_back(std::move(g));
  }
  return out;
}

}  // namespace cgat
