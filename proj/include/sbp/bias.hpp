#pragma once

#include <vector>

#include "sbp/classic.hpp"
#include "sbp/dataset.hpp"

namespace sbp {

// Frequency-derived prior bias: tail classes receive larger entries.
struct GlobalBias {
  Vec b_glo;
  double a = 1.0;
  double eps_glo = 0.001;
};

// b_glo[j] = -log(w[j]^a / sum_k w[k]^a + eps_glo); w positive, summing to 1.
GlobalBias global_bias(const Vec& w, double a, double eps_glo);

// Per-sample correction vector; makes the ground-truth class the strict
// argmax of z + b_tru with margin eps_c against every other class.
struct CorrectionBias {
  Vec b_tru;
  std::size_t r_tru = 0;
  double margin = 0.0;
};

CorrectionBias construct_bias(const Vec& z, const Vec& ctx, const PhiEncoder& phi,
                              const GlobalBias& gb, std::size_t r_tru, double eps_c);

// One CorrectionBias per sample, in batch order. `model` must be frozen; the
// integrated-training path uses build_batch_set_unchecked instead.
std::vector<CorrectionBias> build_batch_set(const std::vector<const Sample*>& batch,
                                            const ClassicModel& model,
                                            const PhiEncoder& phi, const GlobalBias& gb,
                                            double eps_c);

std::vector<CorrectionBias> build_batch_set_unchecked(
    const std::vector<const Sample*>& batch, const ClassicModel& model,
    const PhiEncoder& phi, const GlobalBias& gb, double eps_c);

}  // namespace sbp
