#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "cgat/dataset.hpp"
#include "cgat/metrics.hpp"
#include "cgat/model.hpp"
#include "cgat/optim.hpp"

namespace cgat {

struct TrainConfig {
  double lr = 0.001;
  int epochs = 150;
  std::size_t batch_size = 32;
  int patience = 5;
  double factor = 0.5;
  AdamConfig adam;
  std::uint64_t seed = 0;
};

void validate(const TrainConfig& config);

struct EpochRecord {
  int epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_f1 = 0.0;
  double lr = 0.0;  // learning rate used during this epoch
};

struct TrainResult {
  Model final_model;
  Model best_model;  // highest validation weighted F1 (earliest on ties)
  int best_epoch = 0;
  double best_val_f1 = -1.0;
  std::vector<EpochRecord> history;
};

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Class-balanced minibatch Adam training with plateau learning-rate decay
/// on the validation loss. Every sample of a minibatch runs on its own tape
/// with loss scaled by 1/B, which sums to the block-diagonal batch gradient.
/// When `val` is empty the training set stands in for validation.
TrainResult train(Model model, std::span<const Sample> train_set, std::span<const Sample> val,
                  const TrainConfig& config, const EpochCallback& on_epoch = {});

/// Gradient of the mean cross-entropy of `samples` accumulated into the
/// model's Param::grad (which is zeroed first). Returns the loss.
double accumulate_gradients(Model& model, std::span<const Sample> samples, std::span<const std::size_t> indices,
                            bool training, std::uint64_t dropout_seed);

struct Evaluation {
  Metrics metrics;
  double loss = 0.0;  // mean cross-entropy
  std::vector<int> predictions;
};

/// Inference over every sample (parallel over CGAT_THREADS workers).
Evaluation evaluate(const Model& model, std::span<const Sample> samples);

std::string history_tsv(std::span<const EpochRecord> history);

}  // namespace cgat
