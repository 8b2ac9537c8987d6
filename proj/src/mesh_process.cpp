#include <algorithm>
#include <limits>
#include <sstream>

#include "cgat/error.hpp"
#include "cgat/mesh_process.hpp"

namespace cgat {

Vec3 vertex_centroid(const Mesh& mesh) {
  if (mesh.vertices.empty()) fail(ErrorCode::degenerate_mesh, "mesh has no vertices");
  Vec3 sum = Vec3::Zero();
  for (const auto& v : mesh.vertices) sum += v;
  return sum / static_cast<double>(mesh.vertices.size());
}

Mesh normalize_unit_sphere(const Mesh& mesh, SimilarityTransform* transform) {
  const Vec3 centroid = vertex_centroid(mesh);
  Mesh out = mesh;
  double radius = 0.0;
  for (auto& v : out.vertices) {
    v -= centroid;
    radius = std::max(radius, v.norm());
  }
  if (!(radius > 0.0)) fail(ErrorCode::degenerate_mesh, "all vertices coincide");
  const double scale = 1.0 / radius;
  double max_norm = 0.0;
  for (auto& v : out.vertices) {
    v *= scale;
    max_norm = std::max(max_norm, v.norm());
  }
  // Rounding in 1/radius can leave the farthest vertex a few ulps off 1.
  if (max_norm != 1.0) {
    for (auto& v : out.vertices) v /= max_norm;
  }
  if (transform) {
    transform->translation = -centroid;
    transform->scale = scale / max_norm;
  }
  return out;
}

VertexScalarField distance_to_centroid(const Mesh& mesh) {
  const Vec3 centroid = vertex_centroid(mesh);
  VertexScalarField out;
  out.reserve(mesh.vertices.size());
  for (const auto& v : mesh.vertices) out.push_back((v - centroid).norm());
  return out;
}

FeatureSet compute_features(const Mesh& normalized_mesh) {
  return {mean_curvature(normalized_mesh), distance_to_centroid(normalized_mesh)};
}

std::size_t channel_count(FeatureChannels channels) {
  return channels == FeatureChannels::both ? 2 : 1;
}

std::string to_string(FeatureChannels channels) {
  switch (channels) {
    case FeatureChannels::curv: return "curv";
    case FeatureChannels::dist: return "dist";
    case FeatureChannels::both: return "both";
  }
  return "both";
}

FeatureChannels parse_feature_channels(const std::string& text) {
  if (text == "curv") return FeatureChannels::curv;
  if (text == "dist") return FeatureChannels::dist;
  if (text == "both") return FeatureChannels::both;
  fail(ErrorCode::invalid_config, "unknown feature selection '" + text + "'");
}

namespace {

std::vector<const VertexScalarField*> selected_fields(const FeatureSet& f, FeatureChannels channels) {
  switch (channels) {
    case FeatureChannels::curv: return {&f.curvature};
    case FeatureChannels::dist: return {&f.centroid_distance};
    case FeatureChannels::both: return {&f.curvature, &f.centroid_distance};
  }
  return {};
}

}  // namespace

FeatureScaler FeatureScaler::select(FeatureChannels subset) const {
  if (subset == channels) return *this;
  if (channels != FeatureChannels::both) {
    fail(ErrorCode::invalid_config, "scaler fitted on '" + to_string(channels) +
                                        "' cannot provide '" + to_string(subset) + "'");
  }
  const std::size_t column = subset == FeatureChannels::curv ? 0 : 1;
  return {subset, {minimum.at(column)}, {maximum.at(column)}};
}

FeatureScaler fit_scaler(std::span<const FeatureSet> dataset, FeatureChannels channels) {
  if (dataset.empty()) fail(ErrorCode::invalid_argument, "cannot fit a scaler on an empty dataset");
  const std::size_t d = channel_count(channels);
  FeatureScaler scaler{channels, std::vector<double>(d, std::numeric_limits<double>::infinity()),
                       std::vector<double>(d, -std::numeric_limits<double>::infinity())};
  for (const auto& sample : dataset) {
    const auto fields = selected_fields(sample, channels);
    for (std::size_t c = 0; c < d; ++c) {
      for (double x : *fields[c]) {
        scaler.minimum[c] = std::min(scaler.minimum[c], x);
        scaler.maximum[c] = std::max(scaler.maximum[c], x);
      }
    }
  }
  for (std::size_t c = 0; c < d; ++c) {
    if (!(scaler.maximum[c] > scaler.minimum[c])) {
      fail(ErrorCode::constant_channel, "feature column " + std::to_string(c) + " has no spread");
    }
  }
  return scaler;
}

Tensor apply_scaler(const FeatureScaler& scaler, const FeatureSet& features) {
  if (features.curvature.size() != features.centroid_distance.size()) {
    fail(ErrorCode::feature_length_mismatch, "curvature and distance fields differ in length");
  }
  const auto fields = selected_fields(features, scaler.channels);
  const std::size_t d = fields.size();
  if (scaler.minimum.size() != d || scaler.maximum.size() != d) {
    fail(ErrorCode::invalid_config, "scaler does not match its channel selection");
  }
  const std::size_t n = features.curvature.size();
  Tensor out({n, d});
  for (std::size_t c = 0; c < d; ++c) {
    const double lo = scaler.minimum[c];
    const double range = scaler.maximum[c] - lo;
    for (std::size_t i = 0; i < n; ++i) out(i, c) = 2.0 * ((*fields[c])[i] - lo) / range - 1.0;
  }
  return out;
}

std::string to_string(Split split) {
  switch (split) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::none: return "none";
  }
  return "none";
}

Split parse_split(const std::string& text) {
  if (text == "train") return Split::train;
  if (text == "val") return Split::val;
  if (text == "test") return Split::test;
  if (text == "none" || text.empty()) return Split::none;
  fail(ErrorCode::malformed_file, "unknown split '" + text + "'");
}

std::vector<ManifestRecord> parse_manifest(std::string_view text) {
  std::vector<ManifestRecord> records;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line_no == 1 && line.rfind("path\t", 0) == 0) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty()) {
      fail(ErrorCode::malformed_file, "manifest line " + std::to_string(line_no));
    }
    ManifestRecord r;
    r.path = fields[0];
    try {
      std::size_t used = 0;
      r.label = std::stoi(fields[1], &used);
      if (used != fields[1].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception&) {
      fail(ErrorCode::malformed_file, "bad label on manifest line " + std::to_string(line_no));
    }
    if (r.label < 0 || r.label > 4) {
      fail(ErrorCode::label_out_of_range, "label " + fields[1] + " on manifest line " + std::to_string(line_no));
    }
    r.split = fields.size() == 3 ? parse_split(fields[2]) : Split::none;
    records.push_back(std::move(r));
  }
  return records;
}

std::string serialize_manifest(std::span<const ManifestRecord> records) {
  std::string out = "path\tlabel\tsplit\n";
  for (const auto& r : records) {
    out += r.path + '\t' + std::to_string(r.label) + '\t' + to_string(r.split) + '\n';
  }
  return out;
}

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path) {
  return parse_manifest(read_file(path));
}

void write_manifest(const std::filesystem::path& path, std::span<const ManifestRecord> records) {
  write_file(path, serialize_manifest(records));
}

}  // namespace cgat
