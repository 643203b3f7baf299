#include "sbp/optim.hpp"

#include <algorithm>
#include <cmath>

#include "sbp/errors.hpp"

namespace sbp {

namespace {

void require_unfrozen(const ParamRefs& params, const char* op) {
  for (const Param* p : params)
    if (p->frozen)
      throw FreezeViolation(std::string(op) + ": parameter " + p->name + " is frozen");
}

}  // namespace

void zero_grads(const ParamRefs& params) {
  for (Param* p : params) p->grad.fill(0.0);
}

void sgd_step(const ParamRefs& params, double lr) {
  require_unfrozen(params, "sgd_step");
  for (Param* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      double g = p->grad.at(i);
      if (!std::isfinite(g))
        throw TrainingDivergence("sgd_step: non-finite gradient in " + p->name);
      p->value.at(i) -= lr * g;
    }
    p->grad.fill(0.0);
  }
}

void rmsprop_step(const ParamRefs& params, double lr, double decay, double eps) {
  if (decay <= 0.0 || decay >= 1.0)
    throw ContractViolation("rmsprop_step: decay must be in (0,1)");
  require_unfrozen(params, "rmsprop_step");
  for (Param* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      double g = p->grad.at(i);
      double& v = p->opt_state.at(i);
      v = decay * v + (1.0 - decay) * g * g;
      double update = lr * g / (std::sqrt(v) + eps);
      if (!std::isfinite(update))
        throw TrainingDivergence("rmsprop_step: non-finite update in " + p->name);
      p->value.at(i) -= update;
    }
    p->grad.fill(0.0);
  }
}

void clip_params(const ParamRefs& params, double c) {
  if (c <= 0.0) throw ContractViolation("clip_params: bound must be positive");
  for (Param* p : params)
    for (double& v : p->value.data) v = std::clamp(v, -c, c);
}

}  // namespace sbp
