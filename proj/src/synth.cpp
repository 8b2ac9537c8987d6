#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>

#include "cgat/error.hpp"
#include "cgat/marching_tets.hpp"
#include "cgat/parallel.hpp"
#include "cgat/sampling.hpp"
#include "cgat/synth.hpp"

namespace cgat {

Mesh make_icosphere(int subdivisions, double radius) {
  if (subdivisions < 0 || subdivisions > 8) fail(ErrorCode::invalid_argument, "subdivisions must be in 0..8");
  if (!(radius > 0.0)) fail(ErrorCode::invalid_argument, "radius must be positive");
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  Mesh m;
  m.vertices = {{-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
                {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  m.faces = {{0, 11, 5}, {0, 5, 1}, {0, 1, 7}, {0, 7, 10}, {0, 10, 11}, {1, 5, 9}, {5, 11, 4},
             {11, 10, 2}, {10, 7, 6}, {7, 1, 8}, {3, 9, 4}, {3, 4, 2}, {3, 2, 6}, {3, 6, 8},
             {3, 8, 9}, {4, 9, 5}, {2, 4, 11}, {6, 2, 10}, {8, 6, 7}, {9, 8, 1}};
  for (auto& v : m.vertices) v.normalize();
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<std::int32_t, std::int32_t>, std::int32_t> midpoint;
    auto mid = [&](std::int32_t a, std::int32_t b) {
      const auto key = std::minmax(a, b);
      auto [it, inserted] = midpoint.try_emplace(key, static_cast<std::int32_t>(m.vertices.size()));
      if (inserted) m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
      return it->second;
    };
    std::vector<Face> faces;
    faces.reserve(m.faces.size() * 4);
    for (const auto& f : m.faces) {
      const auto ab = mid(f[0], f[1]);
      const auto bc = mid(f[1], f[2]);
      const auto ca = mid(f[2], f[0]);
      faces.push_back({f[0], ab, ca});
      faces.push_back({f[1], bc, ab});
      faces.push_back({f[2], ca, bc});
      faces.push_back({ab, bc, ca});
    }
    m.faces = std::move(faces);
  }
  for (auto& v : m.vertices) v *= radius;
  return m;
}

std::string stage_name(int stage) {
  static const char* names[kStageCount] = {"D", "E", "F", "G", "H"};
  if (stage < 0 || stage >= kStageCount) fail(ErrorCode::label_out_of_range, "stage outside 0..4");
  return names[stage];
}

namespace {

struct Range {
  double lo, hi;
};

// Per-stage ranges for root length ratio and apex closure.
constexpr Range kRootRatio[kStageCount] = {{0.0, 0.0}, {0.2, 0.35}, {0.5, 0.65}, {0.8, 0.95}, {1.1, 1.4}};
constexpr Range kClosure[kStageCount] = {{0.0, 0.0}, {0.0, 0.15}, {0.3, 0.45}, {0.6, 0.75}, {1.0, 1.0}};

constexpr double kApexTaper = 0.85;  // apex radius / root radius
constexpr double kBlend = 0.12;
constexpr int kTargetVertices = 2600;

double smooth_min(double a, double b, double k) {
  const double h = std::clamp(0.5 + 0.5 * (b - a) / k, 0.0, 1.0);
  return b + (a - b) * h - k * h * (1.0 - h);
}

double smooth_max(double a, double b, double k) { return -smooth_min(-a, -b, k); }

// Distance to a capsule whose radius varies linearly from r0 at p0 to r1 at p1.
double tapered_capsule(const Vec3& p, const Vec3& p0, const Vec3& p1, double r0, double r1) {
  const Vec3 axis = p1 - p0;
  const double t = std::clamp((p - p0).dot(axis) / axis.squaredNorm(), 0.0, 1.0);
  return (p - (p0 + t * axis)).norm() - (r0 + t * (r1 - r0));
}

struct Cavity {
  Vec3 from, to;
  double radius;
};

struct ToothField {
  StageShapeParams params;
  ToothAnatomy anatomy;
  std::vector<Cavity> cavities;

  double crown(const Vec3& p) const {
    const double n = params.crown_exponent;
    const double q = std::pow(std::abs(p.x() / params.crown_a), n) + std::pow(std::abs(p.y() / params.crown_b), n) +
                     std::pow(std::abs(p.z() / params.crown_c), n);
    return (std::pow(q, 1.0 / n) - 1.0) * std::min({params.crown_a, params.crown_b, params.crown_c});
  }

  double operator()(const Vec3& p) const {
    double d = crown(p);
    for (const auto& r : anatomy.roots) {
      d = smooth_min(d, tapered_capsule(p, r.top, r.apex, r.radius, kApexTaper * r.radius), kBlend);
    }
    for (const auto& c : cavities) {
      d = smooth_max(d, -tapered_capsule(p, c.from, c.to, c.radius, c.radius), 0.04);
    }
    return d;
  }
};

ToothField build_field(const StageShapeParams& p) {
  ToothField field{p, {p.crown_a, p.crown_b, p.crown_c, {}}, {}};
  const double length = p.root_length_ratio * 2.0 * p.crown_c;
  const double top_z = -0.3 * p.crown_c;
  const double apex_z = -p.crown_c - length;
  if (p.root_count == 1) {
    const Vec3 top(0.0, 0.0, top_z);
    field.anatomy.roots.push_back({top, Vec3(p.root_splay * length, 0.0, apex_z), p.root_radius});
  } else if (p.root_count == 2) {
    for (double side : {-1.0, 1.0}) {
      const Vec3 top(side * 0.45 * p.crown_a, 0.0, top_z);
      const Vec3 apex(side * (0.45 * p.crown_a + p.root_splay * length), 0.0, apex_z);
      field.anatomy.roots.push_back({top, apex, p.root_radius});
    }
  }
  if (p.root_count == 0) {
    // Crown-only stage: open pulp chamber underneath.
    const double r = 0.45 * std::min(p.crown_a, p.crown_b);
    field.cavities.push_back({Vec3(0, 0, -p.crown_c - 0.3), Vec3(0, 0, -0.45 * p.crown_c), r});
  } else if (p.apex_closure < 1.0) {
    for (const auto& root : field.anatomy.roots) {
      const Vec3 dir = (root.apex - root.top).normalized();
      const double ra = kApexTaper * root.radius;
      const double r = 0.8 * (1.0 - p.apex_closure) * ra;
      if (r <= 0.02) continue;
      // Spherical crater at the tip; wider for less mature apices.
      const Vec3 c = root.apex + 0.6 * ra * dir;
      field.cavities.push_back({c, c + 1e-6 * dir, r});
    }
  }
  return field;
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo == hi ? lo : std::uniform_real_distribution<double>(lo, hi)(rng);
}

void jitter(Mesh& mesh, double noise, std::mt19937_64& rng) {
  if (noise <= 0.0) return;
  std::vector<double> length(mesh.vertices.size(), 0.0);
  std::vector<int> degree(mesh.vertices.size(), 0);
  for (const auto& f : mesh.faces) {
    for (int k = 0; k < 3; ++k) {
      const double l = (mesh.vertices[f[k]] - mesh.vertices[f[(k + 1) % 3]]).norm();
      length[f[k]] += l;
      ++degree[f[k]];
    }
  }
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) {
    Vec3 u;
    do {
      u = Vec3(unit(rng), unit(rng), unit(rng));
    } while (u.squaredNorm() > 1.0);
    const double local = degree[i] ? length[i] / degree[i] : 0.0;
    mesh.vertices[i] += noise * local * u;
  }
}

// Drops everything but the connected component with the most faces.
Mesh largest_component(const Mesh& mesh) {
  std::vector<std::int32_t> parent(mesh.vertices.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&](std::int32_t v) {
    while (parent[v] != v) v = parent[v] = parent[parent[v]];
    return v;
  };
  for (const auto& f : mesh.faces) {
    parent[find(f[1])] = find(f[0]);
    parent[find(f[2])] = find(f[0]);
  }
  std::map<std::int32_t, std::size_t> faces_per_root;
  for (const auto& f : mesh.faces) ++faces_per_root[find(f[0])];
  if (faces_per_root.size() <= 1) return mesh;
  const auto keep = std::max_element(faces_per_root.begin(), faces_per_root.end(),
                                     [](const auto& a, const auto& b) { return a.second < b.second; })
                        ->first;
  Mesh out;
  std::vector<std::int32_t> remap(mesh.vertices.size(), -1);
  for (std::size_t v = 0; v < mesh.vertices.size(); ++v) {
    if (find(static_cast<std::int32_t>(v)) != keep) continue;
    remap[v] = static_cast<std::int32_t>(out.vertices.size());
    out.vertices.push_back(mesh.vertices[v]);
  }
  for (const auto& f : mesh.faces) {
    if (remap[f[0]] >= 0) out.faces.push_back({remap[f[0]], remap[f[1]], remap[f[2]]});
  }
  return out;
}

}  // namespace

void validate(const StageShapeParams& p) {
  auto bad = [](const std::string& what) { fail(ErrorCode::invalid_params, what); };
  if (p.stage < 0 || p.stage >= kStageCount) bad("stage outside 0..4");
  if (!(p.crown_a > 0.2 && p.crown_b > 0.2 && p.crown_c > 0.2)) bad("crown radii must exceed 0.2");
  if (!(p.crown_a < 5.0 && p.crown_b < 5.0 && p.crown_c < 5.0)) bad("crown radii must be below 5");
  if (!(p.crown_exponent >= 2.0 && p.crown_exponent <= 6.0)) bad("crown exponent must be in [2, 6]");
  if (p.root_count < 0 || p.root_count > 2) bad("root count must be 0, 1 or 2");
  if ((p.root_count == 0) != (p.root_length_ratio == 0.0)) bad("roots need a positive length ratio and vice versa");
  if (!(p.root_length_ratio >= 0.0 && p.root_length_ratio <= 3.0)) bad("root length ratio must be in [0, 3]");
  if (!(p.root_radius > 0.05 && p.root_radius < 0.5 * std::min(p.crown_a, p.crown_b))) {
    bad("root radius must be in (0.05, half the crown width)");
  }
  if (!(p.root_splay >= 0.0 && p.root_splay <= 0.5)) bad("root splay must be in [0, 0.5]");
  if (!(p.apex_closure >= 0.0 && p.apex_closure <= 1.0)) bad("apex closure must be in [0, 1]");
  if (p.apex_closure == 1.0 && p.stage != 4) bad("only stage H has closed apices");
  if (!(p.noise >= 0.0 && p.noise <= 0.3)) bad("noise must be in [0, 0.3]");
}

StageShapeParams sample_stage_params(int stage, std::uint64_t seed) {
  if (stage < 0 || stage >= kStageCount) fail(ErrorCode::invalid_params, "stage outside 0..4");
  std::mt19937_64 rng(mix_seed({seed, 0x57a6eull}));
  StageShapeParams p;
  p.stage = stage;
  p.seed = seed;
  p.crown_a = uniform(rng, 0.95, 1.05);
  p.crown_b = uniform(rng, 0.85, 0.95);
  p.crown_c = uniform(rng, 0.65, 0.75);
  p.crown_exponent = uniform(rng, 2.2, 3.0);
  const bool two_roots = uniform(rng, 0.0, 1.0) < 0.5;
  p.root_count = stage == 0 ? 0 : (two_roots ? 2 : 1);
  p.root_length_ratio = uniform(rng, kRootRatio[stage].lo, kRootRatio[stage].hi);
  p.apex_closure = uniform(rng, kClosure[stage].lo, kClosure[stage].hi);
  p.root_radius = (two_roots ? 0.28 : 0.38) * std::min(p.crown_a, p.crown_b) * uniform(rng, 0.9, 1.1);
  p.root_splay = uniform(rng, 0.05, 0.15);
  p.noise = uniform(rng, 0.02, 0.1);
  return p;
}

GeneratedTooth generate_tooth(const StageShapeParams& params) {
  validate(params);
  const ToothField field = build_field(params);
  double lateral = std::max(params.crown_a, params.crown_b);
  double bottom = -params.crown_c;
  for (const auto& r : field.anatomy.roots) {
    lateral = std::max({lateral, std::abs(r.apex.x()) + r.radius, std::abs(r.apex.y()) + r.radius});
    bottom = std::min(bottom, r.apex.z() - r.radius);
  }
  auto polygonize = [&](double h) {
    const double margin = 3.0 * h;
    return largest_component(marching_tetrahedra(std::cref(field), Vec3(-lateral - margin, -lateral - margin, bottom - margin),
                               Vec3(lateral + margin, lateral + margin, params.crown_c + margin), h));
  };
  double spacing = 0.09;
  Mesh mesh = polygonize(spacing);
  for (int attempt = 0; attempt < 8; ++attempt) {
    const auto v = static_cast<double>(mesh.num_vertices());
    if (v >= 1500 && v <= 4000) break;
    spacing *= std::sqrt(v / kTargetVertices);
    mesh = polygonize(spacing);
  }
  if (mesh.num_vertices() < 1500 || mesh.num_vertices() > 4000) {
    fail(ErrorCode::invalid_params, "could not reach 1500-4000 vertices");
  }
  std::mt19937_64 rng(mix_seed({params.seed, 0x717e7ull}));
  jitter(mesh, params.noise, rng);
  return {std::move(mesh), field.anatomy};
}

ToothRegion classify_region(const Vec3& p, const ToothAnatomy& anatomy) {
  for (const auto& r : anatomy.roots) {
    if ((p - r.apex).norm() < 1.5 * r.radius) return ToothRegion::root_apex;
  }
  const double rx = p.x() / anatomy.crown_a;
  const double ry = p.y() / anatomy.crown_b;
  if (std::abs(p.z()) < 0.5 * anatomy.crown_c && rx * rx + ry * ry > 0.36) return ToothRegion::crown_flank;
  return ToothRegion::other;
}

std::string to_string(SynthProfile profile) {
  return profile == SynthProfile::balanced ? "balanced" : "paper";
}

SynthProfile parse_synth_profile(const std::string& text) {
  if (text == "balanced") return SynthProfile::balanced;
  if (text == "paper") return SynthProfile::paper;
  fail(ErrorCode::invalid_config, "unknown profile '" + text + "'");
}

std::vector<int> profile_counts(SynthProfile profile, int amount) {
  if (amount < 1) fail(ErrorCode::invalid_config, "sample count must be positive");
  if (profile == SynthProfile::balanced) return std::vector<int>(kStageCount, amount);
  if (amount < kStageCount) fail(ErrorCode::invalid_config, "paper profile needs at least 5 samples");
  constexpr double kClinical[kStageCount] = {18, 40, 56, 351, 63};
  std::vector<int> counts(kStageCount);
  std::vector<std::pair<double, int>> remainders;
  int assigned = 0;
  for (int s = 0; s < kStageCount; ++s) {
    const double ideal = amount * kClinical[s] / 528.0;
    counts[s] = std::max(1, static_cast<int>(std::floor(ideal)));
    remainders.emplace_back(ideal - std::floor(ideal), s);
    assigned += counts[s];
  }
  std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t k = 0; assigned < amount; k = (k + 1) % remainders.size()) {
    ++counts[remainders[k].second];
    ++assigned;
  }
  while (assigned > amount) {
    --counts[3];
    --assigned;
  }
  return counts;
}

StageShapeParams dataset_sample_params(int stage, std::uint64_t seed, std::size_t index) {
  return sample_stage_params(stage, mix_seed({seed, static_cast<std::uint64_t>(index)}));
}

std::vector<ManifestRecord> generate_dataset(const std::filesystem::path& out_dir, const std::vector<int>& counts,
                                             std::uint64_t seed) {
  if (counts.size() != kStageCount) fail(ErrorCode::invalid_config, "need one count per stage");
  std::vector<ManifestRecord> manifest;
  for (int stage = 0; stage < kStageCount; ++stage) {
    if (counts[stage] < 1) fail(ErrorCode::invalid_config, "every stage needs at least one sample");
    for (int k = 0; k < counts[stage]; ++k) {
      char name[64];
      std::snprintf(name, sizeof name, "meshes/tooth_%05zu.ply", manifest.size());
      manifest.push_back({name, stage, Split::none});
    }
  }
  parallel_for(manifest.size(), [&](std::size_t i) {
    const auto tooth = generate_tooth(dataset_sample_params(manifest[i].label, seed, i));
    write_ply(tooth.mesh, out_dir / manifest[i].path);
  });
  write_manifest(out_dir / "manifest.tsv", manifest);
  return manifest;
}

}  // namespace cgat
