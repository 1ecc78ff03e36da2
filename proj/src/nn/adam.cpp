#include "flin/nn/adam.hpp"

#include <cmath>

namespace flin::nn {

void Adam::step(ParameterSet& params, double grad_scale) {
  ++t_;
  const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
  for (const auto& p : params.items()) {
    if (p->adam_m.size() != p->value.size()) {
      p->adam_m.setZero(p->value.rows(), p->value.cols());
      p->adam_v.setZero(p->value.rows(), p->value.cols());
    }
    Matrix g = p->grad * grad_scale;
    if (config_.l2 > 0.0) g += config_.l2 * p->value;
    p->adam_m = config_.beta1 * p->adam_m + (1.0 - config_.beta1) * g;
    p->adam_v = config_.beta2 * p->adam_v + (1.0 - config_.beta2) * g.cwiseAbs2();
    p->value.array() -=
        config_.learning_rate * (p->adam_m.array() / c1) / ((p->adam_v.array() / c2).sqrt() + config_.epsilon);
    p->grad.setZero();
  }
}

}  // namespace flin::nn
