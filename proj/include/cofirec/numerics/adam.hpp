#pragma once

#include <cstdint>
#include <vector>

#include "cofirec/numerics/matrix.hpp"

namespace cofirec::numerics {

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  // Decoupled (AdamW-style) decay; 0 disables it.
  double weight_decay = 0.0;
};

// Adaptive-moment optimizer with bias correction. Reads gradients from
// Param::grad; throws std::runtime_error on a non-finite gradient before
// touching any parameter.
class Adam {
 public:
  Adam(std::vector<Param*> params, AdamConfig config);

  void step();
  std::int64_t steps() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  std::vector<Param*> params_;
  AdamConfig config_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  std::int64_t t_ = 0;
};

void zero_grads(const std::vector<Param*>& params);

}  // namespace cofirec::numerics
