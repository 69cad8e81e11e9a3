#include "scriptalign/nn/optim.hpp"

#include <cmath>

namespace scriptalign::nn {

double Adam::current_lr() const {
  long long next = step_ + 1;
  double lr = cfg_.lr;
  if (cfg_.warmup_steps > 0 && next <= cfg_.warmup_steps) {
    return lr * static_cast<double>(next) / static_cast<double>(cfg_.warmup_steps);
  }
  if (cfg_.total_steps > cfg_.warmup_steps) {
    double progress = static_cast<double>(next - cfg_.warmup_steps) /
                      static_cast<double>(cfg_.total_steps - cfg_.warmup_steps);
    if (progress > 1.0) progress = 1.0;
    return lr * 0.5 * (1.0 + std::cos(M_PI * progress));
  }
  return lr;
}

void Adam::step(const std::vector<Param*>& params) {
  const double lr = current_lr();
  ++step_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
  for (Param* p : params) {
    p->adam_m = cfg_.beta1 * p->adam_m + (1.0 - cfg_.beta1) * p->grad;
    p->adam_v = (cfg_.beta2 * p->adam_v.array() +
                 (1.0 - cfg_.beta2) * p->grad.array().square()).matrix();
    Eigen::ArrayXXd m_hat = p->adam_m.array() / bc1;
    Eigen::ArrayXXd v_hat = p->adam_v.array() / bc2;
    p->value.array() -= lr * m_hat / (v_hat.sqrt() + cfg_.eps);
  }
}

}  // namespace scriptalign::nn
