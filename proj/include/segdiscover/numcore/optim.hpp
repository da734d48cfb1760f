#pragma once

#include <cstdint>
#include <vector>

#include "segdiscover/numcore/matrix.hpp"

namespace segdiscover {

/// base * 0.5 * (1 + cos(pi * step / total_steps)).
double cosine_lr(std::int64_t step, std::int64_t total_steps, double base);

/// SGD with heavy-ball momentum on a cosine-decayed learning rate.
struct OptimState {
  std::vector<Matrix> velocity;
  double base_lr = 0.1;
  double momentum = 0.9;
  std::int64_t total_steps = 1;
  std::int64_t step = 0;

  double current_lr() const { return cosine_lr(step, total_steps, base_lr); }
};

OptimState make_optim_state(const std::vector<const Matrix*>& params, double base_lr, double momentum,
                            std::int64_t total_steps);

/// v <- m v + g; p <- p - lr(step) v; step += 1. Returns the learning rate used.
double sgd_momentum_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads,
                         OptimState& opt);

/// Rescales grads in place so their joint L2 norm is at most max_norm.
/// Returns the norm before clipping.
double clip_grad_norm(std::vector<Matrix>& grads, double max_norm);

}  // namespace segdiscover
