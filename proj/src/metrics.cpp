#include <cstdlib>
#include <string>

#include "cgat/error.hpp"
#include "cgat/metrics.hpp"

namespace cgat {

Metrics compute_metrics(std::span<const int> truth, std::span<const int> predicted, int classes) {
  if (truth.size() != predicted.size()) fail(ErrorCode::shape_mismatch, "truth and predictions differ in length");
  if (truth.empty()) fail(ErrorCode::empty_eval_set, "no samples to evaluate");
  if (classes < 1) fail(ErrorCode::invalid_argument, "need at least one class");
  Metrics m;
  m.count = truth.size();
  m.confusion.assign(classes, std::vector<int>(classes, 0));
  double abs_error = 0.0;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int t = truth[i];
    const int p = predicted[i];
    if (t < 0 || t >= classes || p < 0 || p >= classes) {
      fail(ErrorCode::label_out_of_range, "label outside 0.." + std::to_string(classes - 1));
    }
    ++m.confusion[t][p];
    abs_error += std::abs(p - t);
    correct += t == p;
  }
  const double n = static_cast<double>(truth.size());
  m.mae = abs_error / n;
  m.accuracy = static_cast<double>(correct) / n;
  m.per_class_f1.assign(classes, 0.0);
  for (int c = 0; c < classes; ++c) {
    double tp = m.confusion[c][c], fp = 0.0, fn = 0.0, support = 0.0;
    for (int o = 0; o < classes; ++o) {
      support += m.confusion[c][o];
      if (o == c) continue;
      fn += m.confusion[c][o];
      fp += m.confusion[o][c];
    }
    const double precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
    const double recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
    const double f1 = tp + 0.5 * (fp + fn) > 0 ? tp / (tp + 0.5 * (fp + fn)) : 0.0;
    m.per_class_f1[c] = f1;
    const double w = support / n;
    m.weighted_precision += w * precision;
    m.weighted_recall += w * recall;
    m.weighted_f1 += w * f1;
  }
  return m;
}

}  // namespace cgat
