#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "segdiscover/numcore/errors.hpp"
#include "segdiscover/numcore/matrix.hpp"
#include "segdiscover/numcore/rng.hpp"

namespace segdiscover {

inline constexpr double kProbabilityFloor = 1e-12;

/// Elementwise tanh written as 1 - 2 / (exp(2x) + 1). Eigen vectorizes exp
/// but not tanh for double; the two agree to within a few ulp.
template <typename Derived>
auto fast_tanh(const Eigen::ArrayBase<Derived>& x) {
  using Scalar = typename Derived::Scalar;
  return Scalar(1) - Scalar(2) / ((Scalar(2) * x).exp() + Scalar(1));
}

/// Wx + b for a single input vector.
template <typename DW, typename DX, typename DB>
VectorX<typename DW::Scalar> affine(const Eigen::MatrixBase<DX>& x, const Eigen::MatrixBase<DW>& W,
                                    const Eigen::MatrixBase<DB>& b) {
  if (W.cols() != x.size() || W.rows() != b.size()) {
    throw InvalidArgument("affine: W is " + std::to_string(W.rows()) + "x" +
                          std::to_string(W.cols()) + ", x has " + std::to_string(x.size()) +
                          ", b has " + std::to_string(b.size()));
  }
  VectorX<typename DW::Scalar> out = W * x.derived().reshaped();
  out += b.derived().reshaped();
  return out;
}

template <typename Derived>
VectorX<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  if (logits.size() == 0) throw InvalidArgument("softmax: empty input");
  VectorX<Scalar> z = logits.derived().reshaped();
  z.array() -= z.maxCoeff();
  z = z.array().exp().matrix();
  return z / z.sum();
}

/// Row-wise softmax, one distribution per row.
template <typename Derived>
MatrixX<typename Derived::Scalar> softmax_rows(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  if (logits.cols() == 0) throw InvalidArgument("softmax_rows: empty rows");
  MatrixX<Scalar> z = logits;
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    z.row(i).array() -= z.row(i).maxCoeff();
    z.row(i) = z.row(i).array().exp().matrix();
    z.row(i) /= z.row(i).sum();
  }
  return z;
}

template <typename Derived>
typename Derived::Scalar cross_entropy(const Eigen::MatrixBase<Derived>& pred, Eigen::Index target) {
  using Scalar = typename Derived::Scalar;
  if (target < 0 || target >= pred.size()) {
    throw InvalidArgument("cross_entropy: target " + std::to_string(target) + " out of range [0," +
                          std::to_string(pred.size()) + ")");
  }
  using std::log;
  using std::max;
  return -log(max(pred.derived().reshaped()(target), Scalar(kProbabilityFloor)));
}

template <typename Derived>
Eigen::Index argmax(const Eigen::MatrixBase<Derived>& v) {
  Eigen::Index best = 0;
  v.derived().reshaped().maxCoeff(&best);
  return best;
}

struct GumbelSample {
  Vector hard;   // exactly one-hot
  Vector soft;   // softmax((logits + g) / tau)
  Vector noise;  // the Gumbel draws g, kept for replay
  Eigen::Index index = 0;
};

/// Draws one category with the Gumbel-max trick. The hard vector is the
/// forward value of the straight-through estimator; its gradient is taken
/// through `soft` (see Tape::straight_through).
template <typename Derived>
GumbelSample gumbel_softmax_sample(const Eigen::MatrixBase<Derived>& logits, double temperature,
                                   Rng& rng) {
  if (!(temperature > 0.0)) throw InvalidArgument("gumbel_softmax_sample: temperature must be > 0");
  if (logits.size() == 0) throw InvalidArgument("gumbel_softmax_sample: empty logits");
  GumbelSample s;
  const Eigen::Index n = logits.size();
  s.noise.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) s.noise(i) = rng.gumbel();
  Vector perturbed = logits.derived().reshaped().template cast<double>() + s.noise;
  s.soft = softmax(perturbed / temperature);
  // argmax of the soft vector, taken before exp() so saturated rows cannot tie
  s.index = argmax(perturbed);
  s.hard = Vector::Zero(n);
  s.hard(s.index) = 1.0;
  return s;
}

}  // namespace segdiscover
