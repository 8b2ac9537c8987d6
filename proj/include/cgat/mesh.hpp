#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace cgat {

using Vec3 = Eigen::Vector3d;
using Face = std::array<std::int32_t, 3>;

/// Triangle mesh. Faces index into `vertices`; winding is counter-clockwise
/// seen from outside for closed meshes.
struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Face> faces;

  std::size_t num_vertices() const { return vertices.size(); }
  std::size_t num_faces() const { return faces.size(); }
};

/// One real value per mesh vertex (curvature, distances, attention scores).
using VertexScalarField = std::vector<double>;

enum class MeshFormat { off, obj, ply };

/// Checks face indices and degeneracy; throws IndexOutOfRange / MalformedFile.
void validate_mesh(const Mesh& mesh);

Mesh parse_mesh(std::string_view bytes, MeshFormat format);

/// Picks the format from the file extension (.off, .obj, .ply).
Mesh load_mesh(const std::filesystem::path& path);
MeshFormat format_from_extension(const std::filesystem::path& path);

/// ASCII PLY with x y z, per-vertex `quality` and viridis-mapped colors.
std::string serialize_ply_scalar(const Mesh& mesh, const VertexScalarField& field);
void write_ply_scalar(const Mesh& mesh, const VertexScalarField& field,
                      const std::filesystem::path& path);

/// Plain ASCII PLY (geometry only).
std::string serialize_ply(const Mesh& mesh);
void write_ply(const Mesh& mesh, const std::filesystem::path& path);

std::string serialize_off(const Mesh& mesh);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

}  // namespace cgat
