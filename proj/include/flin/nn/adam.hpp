#pragma once

#include "flin/nn/parameters.hpp"

namespace flin::nn {

struct AdamConfig {
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double l2 = 0.0;  // adds l2 * w to every gradient
};

/// Adam with bias correction. Moments live on the Parameter.
class Adam {
 public:
  explicit Adam(AdamConfig config) : config_(config) {}

  /// Applies one update using grad * grad_scale, then clears gradients.
  void step(ParameterSet& params, double grad_scale = 1.0);
  long steps() const { return t_; }

 private:
  AdamConfig config_;
  long t_ = 0;
};

}  // namespace flin::nn
