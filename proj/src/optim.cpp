#include "hemera/optim.hpp"

#include <cmath>

#include "hemera/error.hpp"

namespace hemera {

AdamWState AdamWState::zeros_for(const ModelParameters& params) {
  AdamWState s;
  s.first_moment = params.zeros_like();
  s.second_moment = params.zeros_like();
  s.max_second_moment = params.zeros_like();
  return s;
}

void adamw_amsgrad_step(ModelParameters& params, const ModelParameters& grads, AdamWState& state,
                        const AdamWConfig& config) {
  if (!grads.all_finite()) throw Error(ErrorCode::NonFiniteGradient, "gradient contains NaN or Inf");
  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = state.first_moment.tensors();
  auto v = state.second_moment.tensors();
  auto vmax = state.max_second_moment.tensors();
  if (g.size() != p.size() || m.size() != p.size())
    throw Error(ErrorCode::ShapeMismatch, "optimizer state does not match parameters");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bias1 = 1.0 - std::pow(config.beta1, t);
  const double bias2 = 1.0 - std::pow(config.beta2, t);
  const double step_size = config.lr / bias1;
  const double sqrt_bias2 = std::sqrt(bias2);
  const double decay = 1.0 - config.lr * config.weight_decay;

  for (std::size_t i = 0; i < p.size(); ++i) {
    auto pa = p[i]->array();
    const auto ga = g[i]->array();
    auto ma = m[i]->array();
    auto va = v[i]->array();
    auto vm = vmax[i]->array();
    pa *= decay;
    ma = config.beta1 * ma + (1.0 - config.beta1) * ga;
    va = config.beta2 * va + (1.0 - config.beta2) * ga.square();
    vm = vm.max(va);
    pa -= step_size * ma / (vm.sqrt() / sqrt_bias2 + config.eps);
  }
}

}  // namespace hemera
