#pragma once

#include <cstdint>

#include "hemera/model.hpp"

namespace hemera {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

struct AdamWState {
  std::int64_t step = 0;
  ModelParameters first_moment;
  ModelParameters second_moment;
  ModelParameters max_second_moment;

  static AdamWState zeros_for(const ModelParameters& params);
};

// AdamW with the AMSGrad correction:
//   p <- p (1 - lr wd)
//   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2,  v_max <- max(v_max, v)
//   p <- p - lr/(1 - b1^t) * m / (sqrt(v_max / (1 - b2^t)) + eps)
// Throws NonFiniteGradient (leaving params and state untouched) when any
// gradient entry is NaN or infinite.
void adamw_amsgrad_step(ModelParameters& params, const ModelParameters& grads, AdamWState& state,
                        const AdamWConfig& config);

}  // namespace hemera
