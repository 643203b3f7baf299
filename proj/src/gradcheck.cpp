#include "sbp/gradcheck.hpp"

#include <algorithm>
#include <cmath>

#include "sbp/errors.hpp"

namespace sbp {

GradCheckResult finite_diff_check(const std::function<double()>& loss_fn,
                                  const std::function<void()>& grad_fn,
                                  const ParamRefs& params, double step) {
  if (step < 1e-6 || step > 1e-4)
    throw ContractViolation("finite_diff_check: step must be in [1e-6, 1e-4]");
  grad_fn();
  std::vector<Vec> analytic;
  analytic.reserve(params.size());
  for (const Param* p : params) analytic.push_back(p->grad.data);

  GradCheckResult result;
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    Param* p = params[pi];
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      double orig = p->value.at(i);
      p->value.at(i) = orig + step;
      double plus = loss_fn();
      p->value.at(i) = orig - step;
      double minus = loss_fn();
      p->value.at(i) = orig;
      double numeric = (plus - minus) / (2.0 * step);
      double a = analytic[pi][i];
      double denom = std::max({std::fabs(a), std::fabs(numeric), 1e-8});
      double rel = std::fabs(a - numeric) / denom;
      if (rel > result.max_rel_err) {
        result.max_rel_err = rel;
        result.worst_param = p->name + "[" + std::to_string(i) + "]";
        result.analytic = a;
        result.numeric = numeric;
      }
    }
  }
  return result;
}

}  // namespace sbp
