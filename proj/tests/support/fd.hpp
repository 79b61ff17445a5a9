#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "vaer/nn.hpp"

namespace vaer::testing {

struct GradientCheck {
  /// ||a - n|| / (||a|| + ||n||) over the whole gradient. Entry-wise ratios
  /// are meaningless where the true gradient is exactly zero (dead relu
  /// units), which is why the norm form is the headline number.
  double relative = 0.0;
  double worst_absolute = 0.0;  // max |a - n| over entries
  std::size_t parameters = 0;
};

/// Central differences over every entry of `params`, compared against the
/// analytic gradients in `grads` (same layout). `loss` re-evaluates the
/// objective at the current parameter values.
template <class Loss>
GradientCheck check_gradients(const nn::ParamViews& params, const nn::ParamViews& grads, Loss&& loss,
                              double step = 1e-6) {
  GradientCheck out;
  double diff2 = 0.0, a2 = 0.0, n2 = 0.0;
  for (std::size_t a = 0; a < params.size(); ++a) {
    for (std::size_t i = 0; i < params[a].size(); ++i) {
      double& x = params[a][i];
      const double saved = x;
      x = saved + step;
      const double up = loss();
      x = saved - step;
      const double down = loss();
      x = saved;
      const double numeric = (up - down) / (2.0 * step);
      const double analytic = grads[a][i];
      diff2 += (numeric - analytic) * (numeric - analytic);
      a2 += analytic * analytic;
      n2 += numeric * numeric;
      out.worst_absolute = std::max(out.worst_absolute, std::abs(numeric - analytic));
      ++out.parameters;
    }
  }
  const double denom = std::sqrt(a2) + std::sqrt(n2);
  out.relative = denom > 0.0 ? std::sqrt(diff2) / denom : 0.0;
  return out;
}

}  // namespace vaer::testing
