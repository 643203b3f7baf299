#include "sbp/bias.hpp"

#include <cmath>

#include "sbp/errors.hpp"

namespace sbp {

GlobalBias global_bias(const Vec& w, double a, double eps_glo) {
  if (w.empty()) throw ContractViolation("global_bias: empty weight vector");
  if (a < 0.0) throw ContractViolation("global_bias: exponent a must be >= 0");
  double denom = 0.0;
  for (double v : w) {
    if (v <= 0.0) throw ContractViolation("global_bias: weights must be positive");
    denom += std::pow(v, a);
  }
  GlobalBias gb{Vec(w.size()), a, eps_glo};
  for (std::size_t j = 0; j < w.size(); ++j) {
    double ratio = std::pow(w[j], a) / denom + eps_glo;
    if (ratio <= 0.0) throw ContractViolation("global_bias: non-positive argument to log");
    gb.b_glo[j] = -std::log(ratio);
  }
  require_finite(gb.b_glo, "global_bias");
  return gb;
}

CorrectionBias construct_bias(const Vec& z, const Vec& ctx, const PhiEncoder& phi,
                              const GlobalBias& gb, std::size_t r_tru, double eps_c) {
  std::size_t m = z.size();
  if (eps_c <= 0.0) throw ContractViolation("construct_bias: eps_c must be positive");
  if (r_tru >= m) throw ContractViolation("construct_bias: ground-truth class out of range");
  if (gb.b_glo.size() != m) throw ContractViolation("construct_bias: b_glo length mismatch");

  CorrectionBias cb;
  cb.r_tru = r_tru;
  cb.b_tru = phi_forward(phi, ctx);
  for (std::size_t j = 0; j < m; ++j) cb.b_tru[j] += gb.b_glo[j];

  Vec zhat(m);
  auto refresh = [&] {
    for (std::size_t j = 0; j < m; ++j) zhat[j] = z[j] + cb.b_tru[j];
  };
  refresh();

  // Lower the worst offender to exactly eps_c below the ground-truth entry,
  // re-checking until the ground truth wins by eps_c everywhere. Each pass
  // pins one class below the target, so at most m-1 passes can run.
  double target = zhat[r_tru] - eps_c;
  for (std::size_t pass = 0; pass <= m; ++pass) {
    std::size_t r_pre = r_tru;
    double worst = target + 0.05 * eps_c;  // tolerance for the pinned entries
    for (std::size_t c = 0; c < m; ++c) {
      if (c == r_tru) continue;
      if (zhat[c] > worst) {
        worst = zhat[c];
        r_pre = c;
      }
    }
    if (r_pre == r_tru) break;
    if (pass == m)
      throw std::logic_error("construct_bias: correction loop failed to terminate");
    cb.b_tru[r_pre] = target - z[r_pre];
    refresh();
  }

  double best_other = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < m; ++c)
    if (c != r_tru && zhat[c] > best_other) best_other = zhat[c];
  cb.margin = zhat[r_tru] - best_other;
  require_finite(cb.b_tru, "construct_bias");
  return cb;
}

std::vector<CorrectionBias> build_batch_set_unchecked(
    const std::vector<const Sample*>& batch, const ClassicModel& model,
    const PhiEncoder& phi, const GlobalBias& gb, double eps_c) {
  std::vector<CorrectionBias> set;
  set.reserve(batch.size());
  for (const Sample* s : batch) {
    Vec z = model.logits(s->ctx);
    set.push_back(construct_bias(z, s->ctx, phi, gb, s->label, eps_c));
  }
  return set;
}

std::vector<CorrectionBias> build_batch_set(const std::vector<const Sample*>& batch,
                                            const ClassicModel& model,
                                            const PhiEncoder& phi, const GlobalBias& gb,
                                            double eps_c) {
  if (!model.frozen)
    throw FreezeViolation("build_batch_set: classic model must be frozen");
  return build_batch_set_unchecked(batch, model, phi, gb, eps_c);
}

}  // namespace sbp
