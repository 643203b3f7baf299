#pragma once

#include "sbp/nn.hpp"

namespace sbp {

void zero_grads(const ParamRefs& params);

// value <- value - lr * grad, then grads are zeroed.
void sgd_step(const ParamRefs& params, double lr);

// v <- decay*v + (1-decay)*grad^2; value <- value - lr*grad/(sqrt(v)+eps).
// Grads are zeroed afterwards; the accumulator lives in Param::opt_state.
void rmsprop_step(const ParamRefs& params, double lr, double decay, double eps);

// Clamp every parameter value to [-c, c].
void clip_params(const ParamRefs& params, double c);

}  // namespace sbp
