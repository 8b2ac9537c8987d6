#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <mutex>
#include <set>

#include "cgat/error.hpp"
#include "cgat/parallel.hpp"
#include "cgat/sampling.hpp"
#include "cgat/sweep.hpp"

namespace cgat {

double SweepResult::mean_f1(int blocks, ClsMode mode, FeatureChannels features) const {
  double total = 0.0;
  int count = 0;
  for (const auto& r : runs) {
    if (r.blocks == blocks && r.mode == mode && r.features == features) {
      total += r.test_f1;
      ++count;
    }
  }
  return count ? total / count : std::numeric_limits<double>::quiet_NaN();
}

SweepResult depth_sweep(const GraphDataset& dataset, const SweepConfig& config,
                        const std::function<void(const SweepRun&)>& on_run) {
  if (config.repeats < 1) fail(ErrorCode::invalid_config, "repeats must be positive");
  if (config.blocks.empty() || config.modes.empty() || config.features.empty()) {
    fail(ErrorCode::invalid_config, "empty sweep axis");
  }
  SweepResult result;
  for (auto mode : config.modes) {
    for (auto features : config.features) {
      for (int blocks : config.blocks) {
        for (int r = 0; r < config.repeats; ++r) {
          SweepRun run;
          run.blocks = blocks;
          run.mode = mode;
          run.features = features;
          run.repeat = r;
          run.seed = mix_seed({config.seed, static_cast<std::uint64_t>(blocks), static_cast<std::uint64_t>(mode),
                               static_cast<std::uint64_t>(features), static_cast<std::uint64_t>(r)});
          result.runs.push_back(run);
        }
      }
    }
  }

  std::mutex report;
  parallel_for(result.runs.size(), [&](std::size_t i) {
    SweepRun& run = result.runs[i];
    ModelConfig mc = config.base;
    mc.architecture = Architecture::cgat;
    mc.blocks = run.blocks;
    mc.cls_mode = run.mode;
    mc.features = run.features;
    run.name = model_name(mc);
    const auto train_set = make_samples(dataset, mc, Split::train);
    const auto val_set = make_samples(dataset, mc, Split::val);
    const auto test_set = make_samples(dataset, mc, Split::test);
    TrainConfig tc = config.train;
    tc.seed = run.seed;
    const auto trained = train(init_model(mc, run.seed), train_set, val_set, tc);
    const auto ev = evaluate(trained.best_model, test_set);
    run.test_f1 = ev.metrics.weighted_f1;
    run.test_mae = ev.metrics.mae;
    if (on_run) {
      std::lock_guard lock(report);
      on_run(run);
    }
  });
  return result;
}

std::string sweep_runs_tsv(const SweepResult& result) {
  std::string out = "model\tblocks\tcls\tfeatures\trepeat\tseed\ttest_f1\ttest_mae\n";
  char buf[512];
  for (const auto& r : result.runs) {
    std::snprintf(buf, sizeof buf, "%s\t%d\t%s\t%s\t%d\t%llu\t%.6f\t%.6f\n", r.name.c_str(), r.blocks,
                  to_string(r.mode).c_str(), to_string(r.features).c_str(), r.repeat,
                  static_cast<unsigned long long>(r.seed), r.test_f1, r.test_mae);
    out += buf;
  }
  return out;
}

std::string sweep_grid_tsv(const SweepResult& result) {
  std::set<int> depths;
  std::vector<std::pair<ClsMode, FeatureChannels>> families;
  for (const auto& r : result.runs) {
    depths.insert(r.blocks);
    const std::pair key{r.mode, r.features};
    if (std::find(families.begin(), families.end(), key) == families.end()) families.push_back(key);
  }
  std::string out = "family";
  for (int d : depths) out += "\t" + std::to_string(d);
  out += "\n";
  char buf[64];
  for (const auto& [mode, features] : families) {
    out += std::string("CGAT") + (mode == ClsMode::directed ? "→" : "↔") + "-" + to_string(features);
    for (int d : depths) {
      std::snprintf(buf, sizeof buf, "\t%.2f", result.mean_f1(d, mode, features));
      out += buf;
    }
    out += "\n";
  }
  return out;
}

}  // namespace cgat
