#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "segdiscover/numcore/errors.hpp"
#include "segdiscover/numcore/matrix.hpp"

namespace segdiscover {

/// Compares an analytic gradient against central differences
/// (f(p + eps) - f(p - eps)) / 2 eps, coordinate by coordinate, and returns
/// the largest relative error |a - n| / max(|a|, |n|, 1e-8).
///
/// f is evaluated in `Scalar` precision. Passing long double keeps the
/// difference quotient's rounding error well below the tolerances used for
/// double-precision analytic gradients.
template <typename Scalar = double, typename F>
double finite_diff_check(F&& f, const Vector& params, const Vector& analytic, double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-4)) {
    throw InvalidArgument("finite_diff_check: eps must lie in [1e-7, 1e-4]");
  }
  if (params.size() != analytic.size()) {
    throw InvalidArgument("finite_diff_check: parameter and gradient sizes differ");
  }
  VectorX<Scalar> p = params.cast<Scalar>();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    const Scalar saved = p(i);
    p(i) = saved + Scalar(eps);
    const Scalar up = f(static_cast<const VectorX<Scalar>&>(p));
    p(i) = saved - Scalar(eps);
    const Scalar down = f(static_cast<const VectorX<Scalar>&>(p));
    p(i) = saved;
    using std::isfinite;
    if (!isfinite(up) || !isfinite(down)) {
      throw NumericError("finite_diff_check: non-finite function value at coordinate " +
                         std::to_string(i));
    }
    const double numeric = static_cast<double>((up - down) / (Scalar(2) * Scalar(eps)));
    const double a = analytic(i);
    const double denom = std::max({std::abs(a), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(a - numeric) / denom);
  }
  return worst;
}

}  // namespace segdiscover
