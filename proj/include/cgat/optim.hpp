#pragma once

#include <vector>

#include "cgat/tensor.hpp"

namespace cgat {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam with bias correction. Moments are kept per parameter in store order.
class Adam {
 public:
  explicit Adam(const ParamStore& params, AdamConfig config = {});

  /// Applies one update from the current Param::grad values.
  void step(ParamStore& params, double lr);
  long step_count() const { return t_; }

 private:
  AdamConfig config_;
  long t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

/// Halves (by `factor`) the learning rate after `patience` consecutive
/// epochs without improvement; improvement means loss < best - threshold.
class PlateauScheduler {
 public:
  explicit PlateauScheduler(double lr, int patience = 5, double factor = 0.5, double threshold = 1e-8);

  /// Records one epoch's validation loss and returns the learning rate to use next.
  double step(double val_loss);
  double lr() const { return lr_; }
  double best() const { return best_; }
  int stalled_epochs() const { return stalled_; }
  int reductions() const { return reductions_; }

 private:
  double lr_;
  int patience_;
  double factor_;
  double threshold_;
  double best_;
  int stalled_ = 0;
  int reductions_ = 0;
};

}  // namespace cgat
