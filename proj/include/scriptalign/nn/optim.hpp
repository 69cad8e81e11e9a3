#pragma once

#include <cstdint>
#include <vector>

#include "scriptalign/nn/tape.hpp"

namespace scriptalign::nn {

// Adam with linear warm-up into cosine decay.
struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  long long warmup_steps = 0;
  long long total_steps = 0;  // 0 => constant lr after warmup
};

class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}

  double current_lr() const;
  void step(const std::vector<Param*>& params);
  long long steps_taken() const { return step_; }

 private:
  AdamConfig cfg_;
  long long step_ = 0;
};

}  // namespace scriptalign::nn
