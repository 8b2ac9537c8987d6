#pragma once

#include <span>
#include <vector>

namespace cgat {

struct Metrics {
  double weighted_precision = 0.0;
  double weighted_recall = 0.0;
  double weighted_f1 = 0.0;
  double mae = 0.0;  // mean |predicted - true| class index
  double accuracy = 0.0;
  std::vector<double> per_class_f1;
  std::vector<std::vector<int>> confusion;  // [truth][prediction]
  std::size_t count = 0;
};

/// One-vs-rest scores weighted by class support in `truth`. Per-class
/// scores with a zero denominator count as 0. Throws EmptyEvalSet for empty
/// input and LabelOutOfRange for labels outside [0, classes).
Metrics compute_metrics(std::span<const int> truth, std::span<const int> predicted, int classes);

}  // namespace cgat
