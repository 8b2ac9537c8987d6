#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cgat/mesh.hpp"
#include "cgat/tensor.hpp"

namespace cgat {

/// Garland-Heckbert quadric edge collapse down to `target_vertices`.
/// Collapses that would flip an incident face or break manifoldness are
/// skipped. target == V returns the mesh unchanged; target > V throws
/// TargetTooLarge; an edge with more than two faces throws NonManifoldInput.
Mesh decimate_qem(const Mesh& mesh, std::size_t target_vertices);

struct SimilarityTransform {
  Vec3 translation = Vec3::Zero();  // applied first
  double scale = 1.0;

  Vec3 apply(const Vec3& p) const { return (p + translation) * scale; }
};

/// Centers the vertex centroid on the origin and scales so the farthest
/// vertex has norm 1.
Mesh normalize_unit_sphere(const Mesh& mesh, SimilarityTransform* transform = nullptr);

/// Signed discrete mean curvature from the cotangent Laplace-Beltrami
/// operator with mixed Voronoi areas. Positive where the surface is convex
/// (outward faces assumed). Boundary vertices get 0.
VertexScalarField mean_curvature(const Mesh& mesh);

VertexScalarField distance_to_centroid(const Mesh& mesh);

Vec3 vertex_centroid(const Mesh& mesh);

/// Throws NonManifoldInput when an edge is shared by more than two faces.
void require_edge_manifold(const Mesh& mesh);

/// Per-vertex node features.
struct FeatureSet {
  VertexScalarField curvature;
  VertexScalarField centroid_distance;
};

FeatureSet compute_features(const Mesh& normalized_mesh);

enum class FeatureChannels { curv, dist, both };

std::size_t channel_count(FeatureChannels channels);
std::string to_string(FeatureChannels channels);
FeatureChannels parse_feature_channels(const std::string& text);

/// Dataset-wide min/max per selected channel. Column 0 is curvature and
/// column 1 centroid distance when both are selected.
struct FeatureScaler {
  FeatureChannels channels = FeatureChannels::both;
  std::vector<double> minimum;
  std::vector<double> maximum;

  /// Restricts a `both` scaler to a subset of channels.
  FeatureScaler select(FeatureChannels subset) const;
};

FeatureScaler fit_scaler(std::span<const FeatureSet> dataset, FeatureChannels channels);

/// x' = 2 (x - min) / (max - min) - 1 per channel, unclipped. Shape V x d_in.
Tensor apply_scaler(const FeatureScaler& scaler, const FeatureSet& features);

enum class Split { train, val, test, none };

std::string to_string(Split split);
Split parse_split(const std::string& text);

/// One dataset sample: mesh path, stage label (0-4 for D-H) and split.
struct ManifestRecord {
  std::string path;
  int label = 0;
  Split split = Split::none;
};

/// Tab-separated, one record per line, with a `path<TAB>label<TAB>split` header.
std::vector<ManifestRecord> parse_manifest(std::string_view text);
std::string serialize_manifest(std::span<const ManifestRecord> records);
std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, std::span<const ManifestRecord> records);

}  // namespace cgat
