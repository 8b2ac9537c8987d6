#include "cgat/mesh.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>

#include "cgat/colormap.hpp"
#include "cgat/error.hpp"

namespace cgat {

namespace {

std::vector<std::string_view> split_ws(std::string_view line) {
  std::vector<std::string_view> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    if (i > start) tokens.push_back(line.substr(start, i - start));
  }
  return tokens;
}

// Splits into lines, strips `#` comments when requested, drops blank lines.
std::vector<std::string_view> content_lines(std::string_view bytes, bool strip_comments) {
  std::vector<std::string_view> lines;
  std::size_t pos = 0;
  while (pos <= bytes.size()) {
    std::size_t end = bytes.find('\n', pos);
    if (end == std::string_view::npos) end = bytes.size();
    std::string_view line = bytes.substr(pos, end - pos);
    if (strip_comments) {
      if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    }
    if (line.find_first_not_of(" \t\r") != std::string_view::npos) lines.push_back(line);
    pos = end + 1;
  }
  return lines;
}

double to_double(std::string_view token, std::size_t line_no) {
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    fail(ErrorCode::malformed_file,
         "expected a number, got '" + std::string(token) + "' (line " + std::to_string(line_no) + ")");
  }
  return value;
}

long long to_integer(std::string_view token, std::size_t line_no) {
  long long value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    fail(ErrorCode::malformed_file,
         "expected an integer, got '" + std::string(token) + "' (line " + std::to_string(line_no) + ")");
  }
  return value;
}

Face make_face(long long a, long long b, long long c, std::size_t num_vertices) {
  for (long long idx : {a, b, c}) {
    if (idx < 0 || idx >= static_cast<long long>(num_vertices)) {
      fail(ErrorCode::index_out_of_range, "face index " + std::to_string(idx) + " outside [0, " +
                                              std::to_string(num_vertices) + ")");
    }
  }
  return {static_cast<std::int32_t>(a), static_cast<std::int32_t>(b), static_cast<std::int32_t>(c)};
}

Mesh parse_off(std::string_view bytes) {
  auto lines = content_lines(bytes, true);
  if (lines.empty()) fail(ErrorCode::malformed_file, "empty OFF file");
  auto head = split_ws(lines[0]);
  if (head.empty() || head[0] != "OFF") fail(ErrorCode::malformed_file, "missing OFF header");
  std::size_t next = 1;
  std::vector<std::string_view> counts(head.begin() + 1, head.end());
  if (counts.empty()) {
    if (lines.size() < 2) fail(ErrorCode::malformed_file, "missing OFF counts");
    counts = split_ws(lines[1]);
    next = 2;
  }
  if (counts.size() < 2) fail(ErrorCode::malformed_file, "OFF counts line needs V and F");
  auto nv = to_integer(counts[0], next);
  auto nf = to_integer(counts[1], next);
  if (nv < 0 || nf < 0) fail(ErrorCode::malformed_file, "negative OFF counts");
  if (lines.size() < next + static_cast<std::size_t>(nv + nf)) {
    fail(ErrorCode::malformed_file, "OFF body shorter than declared counts");
  }

  Mesh mesh;
  mesh.vertices.reserve(static_cast<std::size_t>(nv));
  for (long long i = 0; i < nv; ++i, ++next) {
    auto t = split_ws(lines[next]);
    if (t.size() < 3) fail(ErrorCode::malformed_file, "OFF vertex needs 3 coordinates");
    mesh.vertices.emplace_back(to_double(t[0], next), to_double(t[1], next), to_double(t[2], next));
  }
  mesh.faces.reserve(static_cast<std::size_t>(nf));
  for (long long i = 0; i < nf; ++i, ++next) {
    auto t = split_ws(lines[next]);
    if (t.empty()) fail(ErrorCode::malformed_file, "empty OFF face");
    auto n = to_integer(t[0], next);
    if (n != 3) fail(ErrorCode::non_triangle_face, "OFF face with " + std::to_string(n) + " vertices");
    if (t.size() < 4) fail(ErrorCode::malformed_file, "OFF face truncated");
    mesh.faces.push_back(make_face(to_integer(t[1], next), to_integer(t[2], next),
                                   to_integer(t[3], next), mesh.vertices.size()));
  }
  return mesh;
}

Mesh parse_obj(std::string_view bytes) {
  auto lines = content_lines(bytes, true);
  Mesh mesh;
  struct RawFace {
    std::array<long long, 3> idx;
  };
  std::vector<RawFace> raw;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    auto t = split_ws(lines[ln]);
    if (t[0] == "v") {
      if (t.size() < 4) fail(ErrorCode::malformed_file, "OBJ vertex needs 3 coordinates");
      mesh.vertices.emplace_back(to_double(t[1], ln + 1), to_double(t[2], ln + 1), to_double(t[3], ln + 1));
    } else if (t[0] == "f") {
      if (t.size() < 4) fail(ErrorCode::malformed_file, "OBJ face needs 3 vertices");
      if (t.size() > 4) {
        fail(ErrorCode::non_triangle_face, "OBJ face with " + std::to_string(t.size() - 1) + " vertices");
      }
      RawFace f{};
      for (int k = 0; k < 3; ++k) {
        auto token = t[1 + k];
        token = token.substr(0, token.find('/'));
        auto idx = to_integer(token, ln + 1);
        if (idx == 0) fail(ErrorCode::malformed_file, "OBJ indices are 1-based");
        // Negative indices are relative to the vertices read so far.
        f.idx[k] = idx > 0 ? idx - 1 : static_cast<long long>(mesh.vertices.size()) + idx;
      }
      raw.push_back(f);
    }
  }
  for (const auto& f : raw) {
    mesh.faces.push_back(make_face(f.idx[0], f.idx[1], f.idx[2], mesh.vertices.size()));
  }
  return mesh;
}

struct PlyProperty {
  std::string name;
  bool is_list = false;
};

struct PlyElement {
  std::string name;
  long long count = 0;
  std::vector<PlyProperty> properties;
};

Mesh parse_ply(std::string_view bytes) {
  auto lines = content_lines(bytes, false);
  if (lines.empty() || split_ws(lines[0]).at(0) != "ply") fail(ErrorCode::malformed_file, "missing ply magic");
  std::vector<PlyElement> elements;
  std::size_t ln = 1;
  bool header_done = false;
  for (; ln < lines.size(); ++ln) {
    auto t = split_ws(lines[ln]);
    if (t[0] == "end_header") {
      header_done = true;
      ++ln;
      break;
    }
    if (t[0] == "format") {
      if (t.size() < 2 || t[1] != "ascii") fail(ErrorCode::malformed_file, "only ASCII PLY is supported");
    } else if (t[0] == "element") {
      if (t.size() < 3) fail(ErrorCode::malformed_file, "bad element line");
      elements.push_back({std::string(t[1]), to_integer(t[2], ln + 1), {}});
    } else if (t[0] == "property") {
      if (elements.empty()) fail(ErrorCode::malformed_file, "property before element");
      if (t.size() >= 5 && t[1] == "list") {
        elements.back().properties.push_back({std::string(t[4]), true});
      } else if (t.size() >= 3) {
        elements.back().properties.push_back({std::string(t[2]), false});
      } else {
        fail(ErrorCode::malformed_file, "bad property line");
      }
    }
  }
  if (!header_done) fail(ErrorCode::malformed_file, "missing end_header");

  Mesh mesh;
  std::vector<std::array<long long, 3>> raw_faces;
  for (const auto& element : elements) {
    if (element.count < 0) fail(ErrorCode::malformed_file, "negative element count");
    std::optional<std::size_t> px, py, pz, plist;
    for (std::size_t p = 0; p < element.properties.size(); ++p) {
      const auto& prop = element.properties[p];
      if (prop.name == "x") px = p;
      if (prop.name == "y") py = p;
      if (prop.name == "z") pz = p;
      if (prop.is_list && (prop.name == "vertex_indices" || prop.name == "vertex_index")) plist = p;
    }
    for (long long i = 0; i < element.count; ++i, ++ln) {
      if (ln >= lines.size()) fail(ErrorCode::malformed_file, "PLY body shorter than header counts");
      auto t = split_ws(lines[ln]);
      std::size_t cursor = 0;
      Vec3 v = Vec3::Zero();
      for (std::size_t p = 0; p < element.properties.size(); ++p) {
        if (cursor >= t.size()) fail(ErrorCode::malformed_file, "PLY element line truncated");
        if (element.properties[p].is_list) {
          auto n = to_integer(t[cursor++], ln + 1);
          if (n < 0 || cursor + static_cast<std::size_t>(n) > t.size()) {
            fail(ErrorCode::malformed_file, "PLY list truncated");
          }
          if (plist && *plist == p) {
            if (n != 3) fail(ErrorCode::non_triangle_face, "PLY face with " + std::to_string(n) + " vertices");
            raw_faces.push_back({to_integer(t[cursor], ln + 1), to_integer(t[cursor + 1], ln + 1),
                                 to_integer(t[cursor + 2], ln + 1)});
          }
          cursor += static_cast<std::size_t>(n);
        } else {
          if (p == px) v.x() = to_double(t[cursor], ln + 1);
          if (p == py) v.y() = to_double(t[cursor], ln + 1);
          if (p == pz) v.z() = to_double(t[cursor], ln + 1);
          ++cursor;
        }
      }
      if (element.name == "vertex") {
        if (!px || !py || !pz) fail(ErrorCode::malformed_file, "vertex element lacks x/y/z");
        mesh.vertices.push_back(v);
      }
    }
  }
  for (const auto& f : raw_faces) mesh.faces.push_back(make_face(f[0], f[1], f[2], mesh.vertices.size()));
  return mesh;
}

std::string format_g9(double value) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9g", value);
  return buf;
}

}  // namespace

void validate_mesh(const Mesh& mesh) {
  const auto n = static_cast<std::int64_t>(mesh.vertices.size());
  for (const auto& f : mesh.faces) {
    for (auto idx : f) {
      if (idx < 0 || idx >= n) fail(ErrorCode::index_out_of_range, "face index " + std::to_string(idx));
    }
    if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
      fail(ErrorCode::malformed_file, "degenerate face (repeated vertex index)");
    }
  }
}

Mesh parse_mesh(std::string_view bytes, MeshFormat format) {
  Mesh mesh;
  switch (format) {
    case MeshFormat::off: mesh = parse_off(bytes); break;
    case MeshFormat::obj: mesh = parse_obj(bytes); break;
    case MeshFormat::ply: mesh = parse_ply(bytes); break;
  }
  validate_mesh(mesh);
  return mesh;
}

MeshFormat format_from_extension(const std::filesystem::path& path) {
  auto ext = path.extension().string();
  for (auto& c : ext) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (ext == ".off") return MeshFormat::off;
  if (ext == ".obj") return MeshFormat::obj;
  if (ext == ".ply") return MeshFormat::ply;
  fail(ErrorCode::malformed_file, "unknown mesh extension '" + ext + "'");
}

Mesh load_mesh(const std::filesystem::path& path) {
  return parse_mesh(read_file(path), format_from_extension(path));
}

std::string serialize_ply_scalar(const Mesh& mesh, const VertexScalarField& field) {
  if (field.size() != mesh.vertices.size()) {
    fail(ErrorCode::feature_length_mismatch, "field has " + std::to_string(field.size()) +
                                                 " values for " + std::to_string(mesh.vertices.size()) +
                                                 " vertices");
  }
  double lo = 0.0, hi = 0.0;
  if (!field.empty()) {
    auto [mn, mx] = std::minmax_element(field.begin(), field.end());
    lo = *mn;
    hi = *mx;
  }
  std::ostringstream out;
  out << "ply\nformat ascii 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "property double quality\n"
      << "property uchar red\nproperty uchar green\nproperty uchar blue\n"
      << "element face " << mesh.faces.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    const auto& v = mesh.vertices[i];
    auto c = map_to_color(field[i], lo, hi);
    out << format_g9(v.x()) << ' ' << format_g9(v.y()) << ' ' << format_g9(v.z()) << ' '
        << format_g9(field[i]) << ' ' << int(c.r) << ' ' << int(c.g) << ' ' << int(c.b) << '\n';
  }
  for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  return out.str();
}

void write_ply_scalar(const Mesh& mesh, const VertexScalarField& field, const std::filesystem::path& path) {
  write_file(path, serialize_ply_scalar(mesh, field));
}

std::string serialize_ply(const Mesh& mesh) {
  std::ostringstream out;
  out << "ply\nformat ascii 1.0\n"
      << "element vertex " << mesh.vertices.size() << "\n"
      << "property double x\nproperty double y\nproperty double z\n"
      << "element face " << mesh.faces.size() << "\n"
      << "property list uchar int vertex_indices\nend_header\n";
  for (const auto& v : mesh.vertices) {
    out << format_g9(v.x()) << ' ' << format_g9(v.y()) << ' ' << format_g9(v.z()) << '\n';
  }
  for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  return out.str();
}

void write_ply(const Mesh& mesh, const std::filesystem::path& path) { write_file(path, serialize_ply(mesh)); }

std::string serialize_off(const Mesh& mesh) {
  std::ostringstream out;
  out << "OFF\n" << mesh.vertices.size() << ' ' << mesh.faces.size() << " 0\n";
  for (const auto& v : mesh.vertices) {
    out << format_g9(v.x()) << ' ' << format_g9(v.y()) << ' ' << format_g9(v.z()) << '\n';
  }
  for (const auto& f : mesh.faces) out << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << '\n';
  return out.str();
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::io_failure, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) fail(ErrorCode::io_failure, "cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) fail(ErrorCode::io_failure, "short write to '" + path.string() + "'");
}

}  // namespace cgat
