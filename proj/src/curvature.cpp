#include <cmath>
#include <unordered_map>

#include "cgat/error.hpp"
#include "cgat/mesh_process.hpp"

namespace cgat {

namespace {

std::uint64_t edge_key(std::int32_t a, std::int32_t b) {
  if (a > b) std::swap(a, b);
  return (std::uint64_t(std::uint32_t(a)) << 32) | std::uint32_t(b);
}

std::unordered_map<std::uint64_t, int> count_edge_faces(const Mesh& mesh) {
  std::unordered_map<std::uint64_t, int> counts;
  counts.reserve(mesh.faces.size() * 2);
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) ++counts[edge_key(f[k], f[(k + 1) % 3])];
  }
  return counts;
}

double cotangent(const Vec3& a, const Vec3& b) {
  const double sine = a.cross(b).norm();
  if (sine <= 0.0) return 0.0;
  return a.dot(b) / sine;
}

}  // namespace

void require_edge_manifold(const Mesh& mesh) {
  for (const auto& [key, count] : count_edge_faces(mesh)) {
    if (count > 2) {
      fail(ErrorCode::non_manifold_input, "edge (" + std::to_string(key >> 32) + ", " +
                                              std::to_string(key & 0xffffffffu) + ") has " +
                                              std::to_string(count) + " faces");
    }
  }
}

VertexScalarField mean_curvature(const Mesh& mesh) {
  validate_mesh(mesh);
  const auto edge_faces = count_edge_faces(mesh);
  const std::size_t n = mesh.vertices.size();
  std::vector<char> boundary(n, 0);
  for (const auto& [key, count] : edge_faces) {
    if (count > 2) fail(ErrorCode::non_manifold_input, "edge shared by more than two faces");
    if (count == 1) {
      boundary[key >> 32] = 1;
      boundary[key & 0xffffffffu] = 1;
    }
  }

  std::vector<Vec3> laplace(n, Vec3::Zero());
  std::vector<Vec3> normal(n, Vec3::Zero());
  std::vector<double> area(n, 0.0);
  for (const auto& f : mesh.faces) {
    const Vec3* p[3] = {&mesh.vertices[f[0]], &mesh.vertices[f[1]], &mesh.vertices[f[2]]};
    const Vec3 face_normal = (*p[1] - *p[0]).cross(*p[2] - *p[0]);
    const double face_area = 0.5 * face_normal.norm();
    double cot[3];
    bool obtuse_at[3];
    for (int k = 0; k < 3; ++k) {
      const Vec3 e1 = *p[(k + 1) % 3] - *p[k];
      const Vec3 e2 = *p[(k + 2) % 3] - *p[k];
      cot[k] = cotangent(e1, e2);
      obtuse_at[k] = e1.dot(e2) < 0.0;
    }
    const bool obtuse = obtuse_at[0] || obtuse_at[1] || obtuse_at[2];
    for (int k = 0; k < 3; ++k) {
      const int i = f[k];
      const int j = f[(k + 1) % 3];
      // Edge (i, j) lies opposite the third corner.
      const Vec3 d = mesh.vertices[i] - mesh.vertices[j];
      laplace[i] += cot[(k + 2) % 3] * d;
      laplace[j] -= cot[(k + 2) % 3] * d;
      normal[f[k]] += face_normal;
      if (!obtuse) {
        const Vec3 to_next = *p[(k + 1) % 3] - *p[k];
        const Vec3 to_prev = *p[(k + 2) % 3] - *p[k];
        area[f[k]] += (to_next.squaredNorm() * cot[(k + 2) % 3] +
                       to_prev.squaredNorm() * cot[(k + 1) % 3]) / 8.0;
      } else {
        area[f[k]] += obtuse_at[k] ? face_area / 2.0 : face_area / 4.0;
      }
    }
  }

  VertexScalarField h(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    if (boundary[i] || area[i] <= 0.0) continue;
    const Vec3 k = laplace[i] / (2.0 * area[i]);
    const double magnitude = 0.5 * k.norm();
    h[i] = k.dot(normal[i]) < 0.0 ? -magnitude : magnitude;
  }
  return h;
}

}  // namespace cgat
