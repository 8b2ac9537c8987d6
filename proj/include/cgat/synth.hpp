#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "cgat/mesh.hpp"
#include "cgat/mesh_process.hpp"

namespace cgat {

/// Unit icosahedron subdivided `subdivisions` times, projected to `radius`.
Mesh make_icosphere(int subdivisions, double radius = 1.0);

inline constexpr int kStageCount = 5;  // D, E, F, G, H
std::string stage_name(int stage);

/// Shape parameters of one synthetic tooth. The crown is a superellipsoid
/// centered at the origin with the occlusal side towards +z; roots hang
/// below it along -z.
struct StageShapeParams {
  int stage = 0;
  double crown_a = 1.0;  // x half-width
  double crown_b = 0.9;  // y half-width
  double crown_c = 0.7;  // z half-height
  double crown_exponent = 2.5;
  int root_count = 0;
  double root_length_ratio = 0.0;  // root length / crown height (2c)
  double root_radius = 0.3;
  double root_splay = 0.15;  // lateral tip offset per unit root length
  double apex_closure = 0.0;  // 1 = closed hemispherical apex
  double noise = 0.0;  // vertex jitter as a fraction of local edge length
  std::uint64_t seed = 0;
};

/// Draws parameters from the stage's ranges (adjacent stages overlap slightly).
StageShapeParams sample_stage_params(int stage, std::uint64_t seed);

/// Throws InvalidParams for out-of-range fields.
void validate(const StageShapeParams& params);

struct RootAxis {
  Vec3 top;
  Vec3 apex;  // lowest point of the root axis
  double radius = 0.0;
};

/// Landmarks in the generated mesh's coordinates.
struct ToothAnatomy {
  double crown_a = 0.0, crown_b = 0.0, crown_c = 0.0;
  std::vector<RootAxis> roots;
};

struct GeneratedTooth {
  Mesh mesh;
  ToothAnatomy anatomy;
};

/// Closed, deterministic surface with 1500-4000 vertices.
GeneratedTooth generate_tooth(const StageShapeParams& params);

enum class ToothRegion { root_apex, crown_flank, other };

/// Region of a point given in the generated (un-normalized) coordinates:
/// within 1.5 root radii of a root apex, or on the crown's side wall
/// (|z| < c/2, outside 60% of the horizontal crown radius).
ToothRegion classify_region(const Vec3& p, const ToothAnatomy& anatomy);

enum class SynthProfile { balanced, paper };

std::string to_string(SynthProfile profile);
SynthProfile parse_synth_profile(const std::string& text);

/// Per-stage sample counts. `balanced` uses `amount` per class; `paper`
/// distributes `amount` total samples like the clinical dataset
/// (18/40/56/351/63 of 528).
std::vector<int> profile_counts(SynthProfile profile, int amount);

/// Parameters of sample `index` in a dataset generated with `seed`.
StageShapeParams dataset_sample_params(int stage, std::uint64_t seed, std::size_t index);

/// Writes `<out>/meshes/tooth_XXXXX.ply` and `<out>/manifest.tsv` (splits
/// left as "none"). Samples are ordered by stage. Returns the manifest.
std::vector<ManifestRecord> generate_dataset(const std::filesystem::path& out_dir, const std::vector<int>& counts,
                                             std::uint64_t seed);

}  // namespace cgat
