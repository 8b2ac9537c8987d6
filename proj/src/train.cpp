#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "cgat/error.hpp"
#include "cgat/parallel.hpp"
#include "cgat/sampling.hpp"
#include "cgat/train.hpp"

namespace cgat {

void validate(const TrainConfig& c) {
  if (!(c.lr > 0.0)) fail(ErrorCode::invalid_config, "learning rate must be positive");
  if (c.epochs < 1) fail(ErrorCode::invalid_config, "epochs must be positive");
  if (c.batch_size < 1) fail(ErrorCode::invalid_config, "batch size must be positive");
  if (c.patience < 1) fail(ErrorCode::invalid_config, "patience must be at least 1");
  if (!(c.factor > 0.0 && c.factor < 1.0)) fail(ErrorCode::invalid_config, "factor must be in (0, 1)");
}

namespace {

double sample_loss(Model& model, const Sample& s, double weight, bool training, std::uint64_t seed) {
  Tape tape;
  const auto vars = bind_params(tape, model);
  std::mt19937_64 rng(seed);
  const auto fv = forward(tape, model, vars, s.graph, training, rng);
  const int label = s.label;
  const Var loss =
      ad::scale(tape, ad::softmax_cross_entropy(tape, fv.logits, std::span<const int>(&label, 1)), weight);
  tape.backward(loss);
  return tape.value(loss)[0];
}

}  // namespace

double accumulate_gradients(Model& model, std::span<const Sample> samples, std::span<const std::size_t> indices,
                            bool training, std::uint64_t dropout_seed) {
  model.params.zero_grad();
  double total = 0.0;
  const double weight = 1.0 / static_cast<double>(indices.size());
  const std::size_t workers = std::min(thread_count(), indices.size());
  if (workers <= 1) {
    for (std::size_t k = 0; k < indices.size(); ++k) {
      total += sample_loss(model, samples[indices[k]], weight, training, mix_seed({dropout_seed, k}));
    }
    return total;
  }
  // Each worker fills its own gradient copy; copies are summed in sample
  // order, so the result matches the single-threaded loop bit for bit.
  std::vector<Model> local(workers, model);
  std::vector<double> losses(workers);
  auto& params = model.params.params();
  for (std::size_t start = 0; start < indices.size(); start += workers) {
    const std::size_t count = std::min(workers, indices.size() - start);
    parallel_for(count, [&](std::size_t j) {
      local[j].params.zero_grad();
      losses[j] = sample_loss(local[j], samples[indices[start + j]], weight, training,
                              mix_seed({dropout_seed, start + j}));
    });
    for (std::size_t j = 0; j < count; ++j) {
      auto& theirs = local[j].params.params();
      for (std::size_t p = 0; p < params.size(); ++p) params[p].grad.mat() += theirs[p].grad.mat();
      total += losses[j];
    }
  }
  return total;
}

Evaluation evaluate(const Model& model, std::span<const Sample> samples) {
  if (samples.empty()) fail(ErrorCode::empty_eval_set, "no samples to evaluate");
  std::vector<Tensor> logits(samples.size());
  parallel_for(samples.size(), [&](std::size_t i) { logits[i] = forward(model, samples[i].graph).logits; });
  Evaluation out;
  std::vector<int> truth;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const Tensor& z = logits[i];
    const int label = samples[i].label;
    if (label < 0 || static_cast<std::size_t>(label) >= z.cols()) {
      fail(ErrorCode::label_out_of_range, "label " + std::to_string(label) + " of '" + samples[i].id + "'");
    }
    const auto pred = softmax_predict(z);
    out.loss -= std::log(std::max(pred.probabilities(0, label), 1e-300));
    out.predictions.push_back(pred.labels[0]);
    truth.push_back(label);
  }
  out.loss /= static_cast<double>(samples.size());
  out.metrics = compute_metrics(truth, out.predictions, model.config.classes);
  return out;
}

TrainResult train(Model model, std::span<const Sample> train_set, std::span<const Sample> val,
                  const TrainConfig& config, const EpochCallback& on_epoch) {
  validate(config);
  if (train_set.empty()) fail(ErrorCode::empty_class, "empty training set");
  const auto monitor = val.empty() ? train_set : val;
  std::vector<int> labels;
  for (const auto& s : train_set) labels.push_back(s.label);

  Adam adam(model.params, config.adam);
  PlateauScheduler scheduler(config.lr, config.patience, config.factor);
  TrainResult result{model, model, 0, -1.0, {}};
  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const double lr = scheduler.lr();
    const auto batches = balanced_batches(labels, config.batch_size, config.seed, epoch);
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches.size(); ++b) {
      const auto seed = mix_seed({config.seed, static_cast<std::uint64_t>(epoch), b, 0xd40ull});
      loss_sum += accumulate_gradients(model, train_set, batches[b], true, seed);
      adam.step(model.params, lr);
    }
    const Evaluation ev = evaluate(model, monitor);
    EpochRecord rec{epoch, loss_sum / static_cast<double>(batches.size()), ev.loss, ev.metrics.weighted_f1, lr};
    scheduler.step(ev.loss);
    if (rec.val_f1 > result.best_val_f1) {
      result.best_val_f1 = rec.val_f1;
      result.best_epoch = epoch;
      result.best_model = model;
    }
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);
  }
  model.params.zero_grad();
  result.best_model.params.zero_grad();
  result.final_model = std::move(model);
  return result;
}

std::string history_tsv(std::span<const EpochRecord> history) {
  std::string out = "epoch\ttrain_loss\tval_loss\tval_f1\tlr\n";
  char buf[256];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%d\t%.9g\t%.9g\t%.9g\t%.9g\n", r.epoch, r.train_loss, r.val_loss, r.val_f1,
                  r.lr);
    out += buf;
  }
  return out;
}

}  // namespace cgat
