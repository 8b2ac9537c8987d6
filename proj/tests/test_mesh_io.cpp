#include <filesystem>
#include <set>
#include <sstream>

#include "doctest.h"
#include "helpers.hpp"

#include "cgat/colormap.hpp"
#include "cgat/mesh.hpp"
#include "cgat/synth.hpp"

using namespace cgat;
using cgat::test::error_code_of;

namespace {

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

// Parses the body of a scalar PLY written by serialize_ply_scalar.
struct PlyRow {
  double quality;
  int r, g, b;
};

std::vector<PlyRow> ply_rows(const std::string& text, std::size_t count) {
  auto lines = lines_of(text);
  auto it = std::find(lines.begin(), lines.end(), "end_header");
  REQUIRE(it != lines.end());
  std::vector<PlyRow> rows;
  for (std::size_t i = 0; i < count; ++i) {
    std::istringstream row(*(++it));
    double x, y, z;
    PlyRow p{};
    row >> x >> y >> z >> p.quality >> p.r >> p.g >> p.b;
    rows.push_back(p);
  }
  return rows;
}

}  // namespace

TEST_SUITE("mesh-io") {

TEST_CASE("OFF tetrahedron") {
  const char* off =
      "OFF\n"
      "# regular tetrahedron\n"
      "4 4 6\n"
      "1 1 1\n1 -1 -1\n-1 1 -1\n-1 -1 1\n"
      "3 0 1 2\n3 0 3 1\n3 0 2 3\n3 1 3 2\n";
  const Mesh m = parse_mesh(off, MeshFormat::off);
  CHECK(m.num_vertices() == 4);
  CHECK(m.num_faces() == 4);
  CHECK(m.vertices[3] == Vec3(-1, -1, 1));
  CHECK(m.faces[1] == Face{0, 3, 1});
}

TEST_CASE("OBJ reads v and f records and rejects quads") {
  const char* obj =
      "# comment\nv 0 0 0\nv 1 0 0\nv 0 1 0\nvn 0 0 1\nvt 0 0\n"
      "f 1/1/1 2/1/1 3/1/1\n";
  const Mesh m = parse_mesh(obj, MeshFormat::obj);
  CHECK(m.num_vertices() == 3);
  REQUIRE(m.num_faces() == 1);
  CHECK(m.faces[0] == Face{0, 1, 2});

  const char* quad = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
  CHECK(error_code_of([&] { parse_mesh(quad, MeshFormat::obj); }) == ErrorCode::non_triangle_face);
}

TEST_CASE("index out of range and malformed input") {
  const char* off = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 3\n";
  CHECK(error_code_of([&] { parse_mesh(off, MeshFormat::off); }) == ErrorCode::index_out_of_range);
  CHECK(error_code_of([&] { parse_mesh("OFF\n3 1 0\n0 0\n", MeshFormat::off); }) == ErrorCode::malformed_file);
  CHECK(error_code_of([&] { parse_mesh("solid x\n", MeshFormat::ply); }) == ErrorCode::malformed_file);
  const char* degenerate = "OFF\n3 1 0\n0 0 0\n1 0 0\n0 1 0\n3 0 1 1\n";
  CHECK_THROWS_AS(parse_mesh(degenerate, MeshFormat::off), Error);
}

TEST_CASE("icosphere PLY with 642 vertices") {
  const Mesh ico = make_icosphere(3);
  const Mesh m = parse_mesh(serialize_ply(ico), MeshFormat::ply);
  CHECK(m.num_vertices() == 642);
  CHECK(m.num_faces() == 1280);
  std::set<std::pair<int, int>> edges;
  for (const auto& f : m.faces) {
    for (int k = 0; k < 3; ++k) edges.emplace(std::minmax(f[k], f[(k + 1) % 3]));
  }
  CHECK(static_cast<long>(m.num_vertices()) - static_cast<long>(edges.size()) + static_cast<long>(m.num_faces()) ==
        2);
}

TEST_CASE("constant field gives zero quality and one color") {
  const Mesh tet = test::tetrahedron();
  const std::string ply = serialize_ply_scalar(tet, {0, 0, 0, 0});
  const auto rows = ply_rows(ply, 4);
  for (const auto& r : rows) {
    CHECK(r.quality == 0.0);
    CHECK(r.r == rows[0].r);
    CHECK(r.g == rows[0].g);
    CHECK(r.b == rows[0].b);
  }
}

TEST_CASE("one-hot field maps the hot vertex to the top color") {
  const Mesh tet = test::tetrahedron();
  const auto rows = ply_rows(serialize_ply_scalar(tet, {0, 1, 0, 0}), 4);
  const Rgb8 top = viridis_table().back();
  const Rgb8 bottom = viridis_table().front();
  CHECK(rows[1].r == top.r);
  CHECK(rows[1].g == top.g);
  CHECK(rows[1].b == top.b);
  CHECK(rows[0].r == bottom.r);
  CHECK(rows[0].g == bottom.g);
  CHECK(rows[0].b == bottom.b);
}

TEST_CASE("scalar PLY round trip and header counts") {
  std::mt19937_64 rng(5);
  Mesh m = make_icosphere(2, 1.3);
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& v : m.vertices) v += Vec3(u(rng), u(rng), u(rng)) * 1e-3;
  VertexScalarField field(m.num_vertices());
  for (auto& f : field) f = u(rng);
  const std::string text = serialize_ply_scalar(m, field);

  const Mesh back = parse_mesh(text, MeshFormat::ply);
  REQUIRE(back.num_vertices() == m.num_vertices());
  CHECK(back.faces == m.faces);
  for (std::size_t i = 0; i < m.num_vertices(); ++i) {
    for (int k = 0; k < 3; ++k) {
      // 9 significant digits: relative agreement at the 5e-9 level.
      CHECK(std::abs(back.vertices[i][k] - m.vertices[i][k]) <= 5e-9 * std::abs(m.vertices[i][k]) + 1e-300);
    }
  }
  // Serializing the parsed mesh again is byte-stable.
  const auto again = parse_mesh(serialize_ply_scalar(back, field), MeshFormat::ply);
  CHECK(again.vertices == back.vertices);

  auto lines = lines_of(text);
  const auto header_end = std::find(lines.begin(), lines.end(), "end_header") - lines.begin();
  CHECK(std::find(lines.begin(), lines.end(), "element vertex " + std::to_string(m.num_vertices())) !=
        lines.end());
  CHECK(std::find(lines.begin(), lines.end(), "element face " + std::to_string(m.num_faces())) != lines.end());
  CHECK(lines.size() - header_end - 1 == m.num_vertices() + m.num_faces());
}

TEST_CASE("field length must match") {
  CHECK_THROWS_AS(serialize_ply_scalar(test::tetrahedron(), {1, 2}), Error);
}

TEST_CASE("file helpers") {
  const auto dir = std::filesystem::temp_directory_path() / "cgat_mesh_io_test";
  std::filesystem::create_directories(dir);
  const Mesh tet = test::tetrahedron();
  write_file(dir / "t.off", serialize_off(tet));
  write_ply(tet, dir / "t.ply");
  CHECK(load_mesh(dir / "t.off").faces == tet.faces);
  CHECK(load_mesh(dir / "t.ply").vertices == tet.vertices);
  CHECK(error_code_of([&] { load_mesh(dir / "missing.ply"); }) == ErrorCode::io_failure);
  CHECK_THROWS_AS(format_from_extension("mesh.stl"), Error);
  std::filesystem::remove_all(dir);
}

TEST_CASE("color map endpoints") {
  CHECK(map_to_color(0.0, 0.0, 1.0) == viridis_table().front());
  CHECK(map_to_color(1.0, 0.0, 1.0) == viridis_table().back());
  CHECK(map_to_color(5.0, 2.0, 2.0) == viridis_table().front());
}

}  // TEST_SUITE
