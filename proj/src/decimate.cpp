#include <algorithm>
#include <cmath>
#include <map>
#include <queue>
#include <unordered_map>

#include <Eigen/Dense>

#include "cgat/error.hpp"
#include "cgat/mesh_process.hpp"

namespace cgat {

namespace {

using Quadric = Eigen::Matrix4d;

// Unit normals of faces sharing a vertex with a collapsing edge must keep a
// positive dot product with their pre-collapse normals (0.2 ~ 78 degrees).
constexpr double kMinNormalCosine = 0.2;

std::uint64_t edge_key(std::int32_t a, std::int32_t b) {
  if (a > b) std::swap(a, b);
  return (std::uint64_t(std::uint32_t(a)) << 32) | std::uint32_t(b);
}

struct Candidate {
  double cost;
  std::int32_t u;
  std::int32_t v;
  std::uint32_t version_u;
  std::uint32_t version_v;
  Vec3 position;

  bool operator>(const Candidate& other) const {
    if (cost != other.cost) return cost > other.cost;
    if (u != other.u) return u > other.u;
    return v > other.v;
  }
};

class Decimator {
 public:
  explicit Decimator(const Mesh& mesh)
      : pos_(mesh.vertices),
        faces_(mesh.faces),
        face_alive_(mesh.faces.size(), 1),
        vert_alive_(mesh.vertices.size(), 1),
        vert_faces_(mesh.vertices.size()),
        quadric_(mesh.vertices.size(), Quadric::Zero()),
        version_(mesh.vertices.size(), 0),
        boundary_(mesh.vertices.size(), 0),
        alive_(mesh.vertices.size()) {
    std::unordered_map<std::uint64_t, int> edge_faces;
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      const auto& face = faces_[f];
      for (int k = 0; k < 3; ++k) {
        vert_faces_[face[k]].push_back(static_cast<std::int32_t>(f));
        if (++edge_faces[edge_key(face[k], face[(k + 1) % 3])] > 2) {
          fail(ErrorCode::non_manifold_input, "edge shared by more than two faces");
        }
      }
      const Vec3& a = pos_[face[0]];
      Vec3 normal = (pos_[face[1]] - a).cross(pos_[face[2]] - a);
      const double twice_area = normal.norm();
      if (twice_area <= 0.0) continue;
      normal /= twice_area;
      Eigen::Vector4d plane(normal.x(), normal.y(), normal.z(), -normal.dot(a));
      const Quadric q = (0.5 * twice_area) * plane * plane.transpose();
      for (int k = 0; k < 3; ++k) quadric_[face[k]] += q;
    }
    for (const auto& [key, count] : edge_faces) {
      if (count == 1) {
        boundary_[key >> 32] = 1;
        boundary_[key & 0xffffffffu] = 1;
      }
    }
  }

  Mesh run(std::size_t target) {
    push_all_edges();
    std::size_t collapses_since_rebuild = 0;
    while (alive_ > target) {
      if (heap_.empty()) {
        if (collapses_since_rebuild == 0) break;
        collapses_since_rebuild = 0;
        push_all_edges();
        continue;
      }
      Candidate c = heap_.top();
      heap_.pop();
      if (!vert_alive_[c.u] || !vert_alive_[c.v]) continue;
      if (version_[c.u] != c.version_u || version_[c.v] != c.version_v) continue;
      if (!can_collapse(c.u, c.v, c.position)) continue;
      collapse(c.u, c.v, c.position);
      ++collapses_since_rebuild;
    }
    if (alive_ > target + 2) {
      fail(ErrorCode::decimation_stalled, "stopped at " + std::to_string(alive_) + " vertices (target " +
                                              std::to_string(target) + ")");
    }
    return compact();
  }

 private:
  std::vector<std::int32_t> neighbors(std::int32_t v) const {
    std::vector<std::int32_t> out;
    for (auto f : vert_faces_[v]) {
      for (auto w : faces_[f]) {
        if (w != v) out.push_back(w);
      }
    }
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
  }

  double quadric_cost(const Quadric& q, const Vec3& p) const {
    Eigen::Vector4d h(p.x(), p.y(), p.z(), 1.0);
    return std::max(0.0, h.dot(q * h));
  }

  Candidate evaluate(std::int32_t u, std::int32_t v) const {
    const Quadric q = quadric_[u] + quadric_[v];
    const Vec3& pu = pos_[u];
    const Vec3& pv = pos_[v];
    const Vec3 mid = 0.5 * (pu + pv);
    Vec3 best = mid;
    double best_cost = quadric_cost(q, mid);
    for (const Vec3* p : {&pu, &pv}) {
      const double cost = quadric_cost(q, *p);
      if (cost < best_cost) {
        best_cost = cost;
        best = *p;
      }
    }
    const Eigen::Matrix3d a = q.topLeftCorner<3, 3>();
    const Vec3 b = -q.topRightCorner<3, 1>();
    Eigen::FullPivLU<Eigen::Matrix3d> lu(a);
    lu.setThreshold(1e-9);
    if (lu.isInvertible()) {
      const Vec3 opt = lu.solve(b);
      // Ill-conditioned systems can place the optimum far off the surface.
      if ((opt - mid).norm() <= (pu - pv).norm()) {
        const double cost = quadric_cost(q, opt);
        if (cost <= best_cost) {
          best_cost = cost;
          best = opt;
        }
      }
    }
    return {best_cost, u, v, version_[u], version_[v], best};
  }

  void push_all_edges() {
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      if (!face_alive_[f]) continue;
      const auto& face = faces_[f];
      for (int k = 0; k < 3; ++k) {
        const auto a = face[k];
        const auto b = face[(k + 1) % 3];
        if (a < b) heap_.push(evaluate(a, b));
        // Boundary edges appear in a single face, possibly with a > b.
        else if (boundary_[a] && boundary_[b]) heap_.push(evaluate(b, a));
      }
    }
  }

  bool can_collapse(std::int32_t u, std::int32_t v, const Vec3& p) const {
    if (alive_ <= 4) return false;
    std::vector<std::int32_t> opposite;
    for (auto f : vert_faces_[u]) {
      const auto& face = faces_[f];
      if (std::find(face.begin(), face.end(), v) == face.end()) continue;
      for (auto w : face) {
        if (w != u && w != v) opposite.push_back(w);
      }
    }
    if (opposite.empty()) return false;
    const bool boundary_edge = opposite.size() == 1;
    if (boundary_[u] != boundary_[v]) return false;
    if (boundary_[u] && boundary_[v] && !boundary_edge) return false;

    // Link condition: the one-rings may only share the opposite vertices.
    const auto nu = neighbors(u);
    const auto nv = neighbors(v);
    std::vector<std::int32_t> common;
    std::set_intersection(nu.begin(), nu.end(), nv.begin(), nv.end(), std::back_inserter(common));
    if (common.size() != opposite.size()) return false;

    for (auto moving : {u, v}) {
      for (auto f : vert_faces_[moving]) {
        const auto& face = faces_[f];
        const bool has_u = std::find(face.begin(), face.end(), u) != face.end();
        const bool has_v = std::find(face.begin(), face.end(), v) != face.end();
        if (has_u && has_v) continue;
        std::array<Vec3, 3> before, after;
        for (int k = 0; k < 3; ++k) {
          before[k] = pos_[face[k]];
          after[k] = face[k] == moving ? p : pos_[face[k]];
        }
        const Vec3 n0 = (before[1] - before[0]).cross(before[2] - before[0]);
        const Vec3 n1 = (after[1] - after[0]).cross(after[2] - after[0]);
        const double l0 = n0.norm();
        const double l1 = n1.norm();
        if (l1 <= 1e-14 * (1.0 + l0)) return false;
        if (l0 > 0.0 && n0.dot(n1) < kMinNormalCosine * l0 * l1) return false;
      }
    }
    return true;
  }

  void collapse(std::int32_t u, std::int32_t v, const Vec3& p) {
    pos_[u] = p;
    quadric_[u] += quadric_[v];
    for (auto f : vert_faces_[v]) {
      auto& face = faces_[f];
      if (std::find(face.begin(), face.end(), u) != face.end()) {
        face_alive_[f] = 0;
        for (auto w : face) {
          if (w == v) continue;
          auto& list = vert_faces_[w];
          list.erase(std::remove(list.begin(), list.end(), f), list.end());
        }
      } else {
        std::replace(face.begin(), face.end(), v, u);
        vert_faces_[u].push_back(f);
      }
    }
    vert_faces_[v].clear();
    vert_alive_[v] = 0;
    --alive_;
    ++version_[u];
    ++version_[v];
    for (auto w : neighbors(u)) heap_.push(evaluate(u, w));
  }

  Mesh compact() const {
    Mesh out;
    std::vector<std::int32_t> remap(pos_.size(), -1);
    for (std::size_t i = 0; i < pos_.size(); ++i) {
      if (!vert_alive_[i]) continue;
      remap[i] = static_cast<std::int32_t>(out.vertices.size());
      out.vertices.push_back(pos_[i]);
    }
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      if (!face_alive_[f]) continue;
      const auto& face = faces_[f];
      out.faces.push_back({remap[face[0]], remap[face[1]], remap[face[2]]});
    }
    return out;
  }

  std::vector<Vec3> pos_;
  std::vector<Face> faces_;
  std::vector<char> face_alive_;
  std::vector<char> vert_alive_;
  std::vector<std::vector<std::int32_t>> vert_faces_;
  std::vector<Quadric> quadric_;
  std::vector<std::uint32_t> version_;
  std::vector<char> boundary_;
  std::size_t alive_;
  std::priority_queue<Candidate, std::vector<Candidate>, std::greater<Candidate>> heap_;
};

}  // namespace

Mesh decimate_qem(const Mesh& mesh, std::size_t target_vertices) {
  validate_mesh(mesh);
  if (target_vertices > mesh.vertices.size()) {
    fail(ErrorCode::target_too_large, "target " + std::to_string(target_vertices) + " exceeds " +
                                          std::to_string(mesh.vertices.size()) + " vertices");
  }
  if (target_vertices < 4) fail(ErrorCode::invalid_argument, "target must be at least 4 vertices");
  require_edge_manifold(mesh);
  if (target_vertices == mesh.vertices.size()) return mesh;
  return Decimator(mesh).run(target_vertices);
}

}  // namespace cgat
