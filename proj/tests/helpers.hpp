#pragma once

#include <algorithm>
#include <numeric>
#include <random>
#include <vector>

#include "doctest.h"

#include "cgat/error.hpp"
#include "cgat/graph.hpp"
#include "cgat/mesh.hpp"
#include "cgat/model.hpp"

namespace cgat::test {

inline Mesh tetrahedron() {
  Mesh m;
  m.vertices = {Vec3(1, 1, 1), Vec3(1, -1, -1), Vec3(-1, 1, -1), Vec3(-1, -1, 1)};
  m.faces = {{0, 1, 2}, {0, 3, 1}, {0, 2, 3}, {1, 3, 2}};
  return m;
}

inline Mesh single_triangle() {
  Mesh m;
  m.vertices = {Vec3(0, 0, 0), Vec3(1, 0, 0), Vec3(0, 1, 0)};
  m.faces = {{0, 1, 2}};
  return m;
}

inline Tensor random_matrix(std::size_t rows, std::size_t cols, std::mt19937_64& rng, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t({rows, cols});
  for (auto& v : t.storage()) v = u(rng);
  return t;
}

/// Connected random graph on n nodes: a random spanning tree plus extra
/// edges, both directions of every edge.
inline Graph random_graph(std::size_t n, std::size_t d_in, std::mt19937_64& rng, double extra_density = 0.2) {
  std::vector<std::pair<std::int32_t, std::int32_t>> edges;
  for (std::size_t i = 1; i < n; ++i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    const auto j = static_cast<std::int32_t>(pick(rng));
    edges.emplace_back(j, static_cast<std::int32_t>(i));
    edges.emplace_back(static_cast<std::int32_t>(i), j);
  }
  std::bernoulli_distribution extra(extra_density);
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = a + 1; b < n; ++b) {
      if (!extra(rng)) continue;
      edges.emplace_back(static_cast<std::int32_t>(a), static_cast<std::int32_t>(b));
      edges.emplace_back(static_cast<std::int32_t>(b), static_cast<std::int32_t>(a));
    }
  }
  return make_graph(random_matrix(n, d_in, rng), edges);
}

/// Relabels nodes: new node perm[i] is old node i.
inline Graph permute_graph(const Graph& g, const std::vector<std::int32_t>& perm) {
  const std::size_t n = g.num_nodes();
  Tensor x({n, g.feature_width()});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < g.feature_width(); ++c) x(perm[i], c) = g.x(i, c);
  }
  std::vector<std::pair<std::int32_t, std::int32_t>> edges;
  for (std::size_t e = 0; e < g.num_edges(); ++e) edges.emplace_back(perm[g.source[e]], perm[g.target[e]]);
  return make_graph(std::move(x), edges);
}

inline std::vector<std::int32_t> random_permutation(std::size_t n, std::mt19937_64& rng) {
  std::vector<std::int32_t> p(n);
  std::iota(p.begin(), p.end(), 0);
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

inline ModelConfig tiny_config(int blocks = 2, int hidden = 4, int heads = 2) {
  ModelConfig c;
  c.blocks = blocks;
  c.hidden = hidden;
  c.heads = heads;
  c.dropout = 0.0;
  return c;
}

inline double max_abs_diff(const Tensor& a, const Tensor& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <typename Fn>
ErrorCode error_code_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return ErrorCode::invalid_argument;
}

}  // namespace cgat::test
