#include <algorithm>
#include <cmath>
#include <unordered_map>

#include "cgat/error.hpp"
#include "cgat/marching_tets.hpp"

namespace cgat {

namespace {

// Cube corners as (dx, dy, dz); tetrahedra share the 0-6 diagonal so that
// neighboring cubes split their common faces identically.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kTets[6][4] = {{0, 5, 1, 6}, {0, 1, 2, 6}, {0, 2, 3, 6},
                             {0, 3, 7, 6}, {0, 7, 4, 6}, {0, 4, 5, 6}};

// Keeps crossings away from grid nodes so no triangle collapses.
constexpr double kMinFraction = 0.05;

}  // namespace

Mesh marching_tetrahedra(const ScalarFunction& field, const Vec3& lo, const Vec3& hi, double spacing) {
  if (!(spacing > 0.0)) fail(ErrorCode::invalid_argument, "grid spacing must be positive");
  std::array<long, 3> cells{};
  for (int a = 0; a < 3; ++a) {
    cells[a] = std::max(1L, static_cast<long>(std::ceil((hi[a] - lo[a]) / spacing)));
  }
  const long nx = cells[0] + 1, ny = cells[1] + 1, nz = cells[2] + 1;
  if (nx * ny * nz > 50'000'000L) fail(ErrorCode::invalid_argument, "grid too fine");
  auto node = [&](long i, long j, long k) { return (k * ny + j) * nx + i; };
  auto position = [&](long id) {
    const long i = id % nx;
    const long j = (id / nx) % ny;
    const long k = id / (nx * ny);
    return Vec3(lo.x() + spacing * i, lo.y() + spacing * j, lo.z() + spacing * k);
  };

  std::vector<double> value(nx * ny * nz);
  for (long id = 0; id < static_cast<long>(value.size()); ++id) {
    double f = field(position(id));
    if (!std::isfinite(f)) fail(ErrorCode::non_finite, "implicit function returned NaN/Inf");
    if (f == 0.0) f = 1e-12;
    value[id] = f;
  }

  Mesh mesh;
  std::unordered_map<std::uint64_t, std::int32_t> crossing;
  auto vertex_on = [&](long a, long b) {
    if (a > b) std::swap(a, b);
    const auto key = (static_cast<std::uint64_t>(a) << 32) | static_cast<std::uint64_t>(b);
    auto [it, inserted] = crossing.try_emplace(key, static_cast<std::int32_t>(mesh.vertices.size()));
    if (inserted) {
      const double t = std::clamp(value[a] / (value[a] - value[b]), kMinFraction, 1.0 - kMinFraction);
      mesh.vertices.push_back(position(a) + t * (position(b) - position(a)));
    }
    return it->second;
  };
  auto emit = [&](std::int32_t a, std::int32_t b, std::int32_t c, const Vec3& outward) {
    const Vec3 n = (mesh.vertices[b] - mesh.vertices[a]).cross(mesh.vertices[c] - mesh.vertices[a]);
    if (n.dot(outward) < 0.0) std::swap(b, c);
    mesh.faces.push_back({a, b, c});
  };

  for (long k = 0; k + 1 < nz; ++k) {
    for (long j = 0; j + 1 < ny; ++j) {
      for (long i = 0; i + 1 < nx; ++i) {
        long corner[8];
        for (int c = 0; c < 8; ++c) corner[c] = node(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2]);
        for (const auto& tet : kTets) {
          long in[4], out[4];
          int n_in = 0, n_out = 0;
          for (int c : tet) {
            const long id = corner[c];
            if (value[id] < 0.0) in[n_in++] = id;
            else out[n_out++] = id;
          }
          if (n_in == 0 || n_out == 0) continue;
          Vec3 in_center = Vec3::Zero(), out_center = Vec3::Zero();
          for (int q = 0; q < n_in; ++q) in_center += position(in[q]) / n_in;
          for (int q = 0; q < n_out; ++q) out_center += position(out[q]) / n_out;
          const Vec3 outward = out_center - in_center;
          if (n_in == 1 || n_out == 1) {
            const long apex = n_in == 1 ? in[0] : out[0];
            const long* others = n_in == 1 ? out : in;
            emit(vertex_on(apex, others[0]), vertex_on(apex, others[1]), vertex_on(apex, others[2]), outward);
          } else {
            // Quad through the four crossing edges, split along one diagonal.
            const std::int32_t a = vertex_on(in[0], out[0]);
            const std::int32_t b = vertex_on(in[0], out[1]);
            const std::int32_t c = vertex_on(in[1], out[1]);
            const std::int32_t d = vertex_on(in[1], out[0]);
            emit(a, b, c, outward);
            emit(a, c, d, outward);
          }
        }
      }
    }
  }
  return mesh;
}

}  // namespace cgat
