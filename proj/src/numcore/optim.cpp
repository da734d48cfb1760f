#include "segdiscover/numcore/optim.hpp"

#include <cmath>
#include <numbers>
#include <string>

#include "segdiscover/numcore/errors.hpp"

namespace segdiscover {

double cosine_lr(std::int64_t step, std::int64_t total_steps, double base) {
  if (total_steps <= 0) throw InvalidArgument("cosine_lr: total_steps must be positive");
  if (step < 0 || step > total_steps) {
    throw InvalidArgument("cosine_lr: step " + std::to_string(step) + " outside [0, " +
                          std::to_string(total_steps) + "]");
  }
  if (step == total_steps) return 0.0;
  const double phase = std::numbers::pi * static_cast<double>(step) / static_cast<double>(total_steps);
  return base * 0.5 * (1.0 + std::cos(phase));
}

OptimState make_optim_state(const std::vector<const Matrix*>& params, double base_lr, double momentum,
                            std::int64_t total_steps) {
  if (base_lr < 0.0) throw InvalidArgument("make_optim_state: negative learning rate");
  OptimState opt;
  opt.base_lr = base_lr;
  opt.momentum = momentum;
  opt.total_steps = total_steps;
  for (const Matrix* p : params) opt.velocity.push_back(Matrix::Zero(p->rows(), p->cols()));
  return opt;
}

double sgd_momentum_step(const std::vector<Matrix*>& params, const std::vector<Matrix>& grads,
                         OptimState& opt) {
  if (params.size() != grads.size() || params.size() != opt.velocity.size()) {
    throw InvalidArgument("sgd_momentum_step: parameter/gradient/velocity count mismatch");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    const Matrix& g = grads[i];
    if (g.rows() != params[i]->rows() || g.cols() != params[i]->cols() ||
        opt.velocity[i].rows() != g.rows() || opt.velocity[i].cols() != g.cols()) {
      throw InvalidArgument("sgd_momentum_step: shape mismatch at parameter " + std::to_string(i));
    }
  }
  const double lr = opt.current_lr();
  for (std::size_t i = 0; i < params.size(); ++i) {
    opt.velocity[i] = opt.momentum * opt.velocity[i] + grads[i];
    *params[i] -= lr * opt.velocity[i];
  }
  ++opt.step;
  return lr;
}

double clip_grad_norm(std::vector<Matrix>& grads, double max_norm) {
  double sq = 0.0;
  for (const Matrix& g : grads) sq += g.squaredNorm();
  const double norm = std::sqrt(sq);
  if (norm > max_norm && norm > 0.0) {
    const double s = max_norm / norm;
    for (Matrix& g : grads) g *= s;
  }
  return norm;
}

}  // namespace segdiscover
