#pragma once

#include <functional>
#include <string>

#include "sbp/nn.hpp"

namespace sbp {

struct GradCheckResult {
  double max_rel_err = 0.0;
  std::string worst_param;   // "name[index]" of the worst coordinate
  double analytic = 0.0;
  double numeric = 0.0;
};

// Central finite differences against analytic gradients.
//   loss_fn: pure forward pass returning the scalar loss (no side effects on
//            grads); re-evaluated twice per parameter coordinate.
//   grad_fn: zeroes grads, runs forward+backward, leaves analytic gradients
//            in each Param::grad.
// Relative error uses denominator max(|analytic|, |numeric|, 1e-8).
GradCheckResult finite_diff_check(const std::function<double()>& loss_fn,
                                  const std::function<void()>& grad_fn,
                                  const ParamRefs& params, double step);

}  // namespace sbp
