#pragma once

#include <functional>
#include <string>
#include <vector>

#include "cgat/dataset.hpp"
#include "cgat/train.hpp"

namespace cgat {

struct SweepConfig {
  ModelConfig base;
  TrainConfig train;
  std::vector<int> blocks = {1, 2, 3, 4, 5, 6};
  std::vector<ClsMode> modes = {ClsMode::undirected, ClsMode::directed};
  std::vector<FeatureChannels> features = {FeatureChannels::curv, FeatureChannels::dist, FeatureChannels::both};
  int repeats = 10;
  std::uint64_t seed = 0;
};

/// One trained model, scored with its best-validation checkpoint on the test split.
struct SweepRun {
  std::string name;
  int blocks = 0;
  ClsMode mode = ClsMode::directed;
  FeatureChannels features = FeatureChannels::both;
  int repeat = 0;
  std::uint64_t seed = 0;
  double test_f1 = 0.0;
  double test_mae = 0.0;
};

struct SweepResult {
  std::vector<SweepRun> runs;  // ordered by (mode, features, blocks, repeat)

  /// Mean test F1 over repeats of one cell; NaN when the cell is absent.
  double mean_f1(int blocks, ClsMode mode, FeatureChannels features) const;
};

/// Trains every (blocks, mode, features, repeat) combination. Runs are
/// distributed over CGAT_THREADS workers and seeded only by their
/// coordinates, so results do not depend on scheduling.
SweepResult depth_sweep(const GraphDataset& dataset, const SweepConfig& config,
                        const std::function<void(const SweepRun&)>& on_run = {});

/// Long format: one row per trained model.
std::string sweep_runs_tsv(const SweepResult& result);
/// Grid: one row per model family (mode x features), one column per depth,
/// cells hold the mean test weighted F1.
std::string sweep_grid_tsv(const SweepResult& result);

}  // namespace cgat
