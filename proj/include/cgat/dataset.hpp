#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "cgat/graph.hpp"
#include "cgat/mesh_process.hpp"
#include "cgat/model.hpp"

namespace cgat {

struct PreprocessConfig {
  std::size_t target_vertices = 750;
  /// Fit the feature scaler on every sample instead of the training split.
  bool fit_scaler_on_all = false;
  std::uint64_t split_seed = 0;
};

/// A decimated, unit-sphere-normalized mesh with its raw (unscaled) features.
struct GraphRecord {
  std::string id;
  int label = 0;
  Split split = Split::none;
  Mesh mesh;
  FeatureSet features;
};

struct GraphDataset {
  PreprocessConfig config;
  FeatureScaler scaler;  // fitted on both channels
  std::vector<GraphRecord> records;
};

/// Decimate, normalize and compute raw features. Meshes already at or below
/// the target are only normalized.
GraphRecord preprocess_mesh(const Mesh& mesh, std::size_t target_vertices);

/// Runs preprocess_mesh over the manifest (relative paths resolve against
/// `base_dir`), assigns stratified splits to records whose split is `none`
/// and fits the scaler.
GraphDataset preprocess_dataset(std::span<const ManifestRecord> manifest, const std::filesystem::path& base_dir,
                                const PreprocessConfig& config);

/// Assigns stratified splits where missing and fits the scaler.
void finalize_dataset(GraphDataset& dataset);

FeatureScaler fit_dataset_scaler(std::span<const GraphRecord> records, bool use_all);

/// Binary cache: "CGATGRAPHS1" line, a JSON header block, then per record a
/// text line and raw little-endian vertex, face and feature arrays.
void save_graph_cache(const std::filesystem::path& path, const GraphDataset& dataset);
GraphDataset load_graph_cache(const std::filesystem::path& path);

/// Scaled feature graph of one record.
Graph record_graph(const GraphRecord& record, const FeatureScaler& scaler, FeatureChannels channels);

/// A model-ready single-graph batch with its label.
struct Sample {
  std::string id;
  int label = 0;
  GraphBatch graph;
};

Sample make_sample(const GraphRecord& record, const FeatureScaler& scaler, const ModelConfig& config);
std::vector<Sample> make_samples(const GraphDataset& dataset, const ModelConfig& config, Split split);

}  // namespace cgat
