#include <cmath>
#include <limits>

#include "cgat/error.hpp"
#include "cgat/optim.hpp"

namespace cgat {

Adam::Adam(const ParamStore& params, AdamConfig config) : config_(config) {
  for (const auto& p : params.params()) {
    m_.emplace_back(p.value.size(), 0.0);
    v_.emplace_back(p.value.size(), 0.0);
  }
}

void Adam::step(ParamStore& params, double lr) {
  auto& list = params.params();
  if (list.size() != m_.size()) fail(ErrorCode::shape_mismatch, "optimizer state does not match parameters");
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (std::size_t k = 0; k < list.size(); ++k) {
    auto& p = list[k];
    auto& m = m_[k];
    auto& v = v_[k];
    double* w = p.value.data();
    const double* g = p.grad.data();
    for (std::size_t i = 0; i < m.size(); ++i) {
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g[i];
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g[i] * g[i];
      const double m_hat = m[i] / c1;
      const double v_hat = v[i] / c2;
      w[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.eps);
    }
  }
}

PlateauScheduler::PlateauScheduler(double lr, int patience, double factor, double threshold)
    : lr_(lr),
      patience_(patience),
      factor_(factor),
      threshold_(threshold),
      best_(std::numeric_limits<double>::infinity()) {
  if (!(lr > 0.0)) fail(ErrorCode::invalid_config, "learning rate must be positive");
  if (patience < 1) fail(ErrorCode::invalid_config, "patience must be at least 1");
  if (!(factor > 0.0 && factor < 1.0)) fail(ErrorCode::invalid_config, "factor must be in (0, 1)");
}

double PlateauScheduler::step(double val_loss) {
  if (val_loss < best_ - threshold_) {
    best_ = val_loss;
    stalled_ = 0;
  } else if (++stalled_ >= patience_) {
    lr_ *= factor_;
    stalled_ = 0;
    ++reductions_;
  }
  return lr_;
}

}  // namespace cgat
