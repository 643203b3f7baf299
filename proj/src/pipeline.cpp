#include "sbp/pipeline.hpp"

#include <cstdio>
#include <sstream>

#include "sbp/errors.hpp"

namespace sbp {

namespace {
// Stream tags for deriving per-stage RNGs from the master seed.
constexpr std::uint64_t kPhiStream = 11;
constexpr std::uint64_t kClassicStream = 12;
constexpr std::uint64_t kBganStream = 13;
}  // namespace

Dataset make_dataset(const ExperimentConfig& cfg) { return generate(cfg.dataset); }

PhiEncoder make_phi(const ExperimentConfig& cfg) {
  Rng root(cfg.seed);
  Rng phi_rng = root.split(kPhiStream);
  return PhiEncoder(cfg.bias.phi_variant, cfg.dataset.feature_dim(),
                    cfg.dataset.m_classes, phi_rng);
}

GlobalBias make_global_bias(const ExperimentConfig& cfg, const Dataset& ds) {
  if (!cfg.bias.use_global_bias)
    return GlobalBias{Vec(ds.spec.m_classes, 0.0), cfg.bias.a, cfg.bias.eps_glo};
  return global_bias(ds.empirical_train_weights(), cfg.bias.a, cfg.bias.eps_glo);
}

ClassicTrainResult run_train_classic(const ExperimentConfig& cfg, const Dataset& ds) {
  Rng root(cfg.seed);
  Rng classic_rng = root.split(kClassicStream);
  return train_classic(ds, cfg.classic, classic_rng);
}

BganResult run_train_bgan(const ExperimentConfig& cfg, const Dataset& ds,
                          const ClassicModel& model) {
  Rng root(cfg.seed);
  Rng bgan_rng = root.split(kBganStream);
  PhiEncoder phi = make_phi(cfg);
  GlobalBias gb = make_global_bias(cfg, ds);
  return train_bgan(model, phi, gb, ds, cfg.bgan, cfg.bias.eps_c, bgan_rng);
}

IntegratedResult run_train_integrated(const ExperimentConfig& cfg, const Dataset& ds) {
  Rng root(cfg.seed);
  Rng bgan_rng = root.split(kBganStream);
  PhiEncoder phi = make_phi(cfg);
  GlobalBias gb = make_global_bias(cfg, ds);
  return train_integrated(ds, cfg.classic, cfg.bgan, phi, gb, cfg.bias.eps_c, bgan_rng);
}

namespace {

Vec positive_train_frequencies(const Dataset& ds) {
  Vec freq = ds.empirical_train_weights();
  for (std::size_t c = 0; c < freq.size(); ++c)
    if (freq[c] <= 0.0)
      throw ContractViolation("corrector: class " + std::to_string(c) +
                              " has zero training frequency");
  return freq;
}

}  // namespace

Corrector build_corrector(CorrectorKind kind, const ExperimentConfig& cfg,
                          const Dataset& ds, const Generator* gen, const GlobalBias& gb) {
  switch (kind) {
    case CorrectorKind::Identity:
      return Corrector::identity();
    case CorrectorKind::PosteriorDivide:
      return Corrector::posterior_divide(positive_train_frequencies(ds));
    case CorrectorKind::ResistanceSubtract: {
      // Resistance bias = negative prior bias of the empirical frequencies;
      // subtracting it penalizes head classes.
      GlobalBias prior = global_bias(positive_train_frequencies(ds), cfg.bias.a,
                                     cfg.bias.eps_glo);
      Vec b_res(prior.b_glo.size());
      for (std::size_t i = 0; i < b_res.size(); ++i) b_res[i] = -prior.b_glo[i];
      return Corrector::resistance_subtract(std::move(b_res));
    }
    default:
      if (gen == nullptr)
        throw UsageError("sbp corrector requested but no trained generator is available");
      return Corrector::sbp(gen, gb.b_glo);
  }
}

std::vector<std::pair<std::string, MetricsReport>> run_evaluation(
    const ExperimentConfig& cfg, const Dataset& ds, const ClassicModel& model,
    const Generator* gen, const GlobalBias& gb) {
  std::vector<std::pair<std::string, MetricsReport>> reports;
  for (CorrectorKind kind : cfg.eval.correctors) {
    Corrector corrector = build_corrector(kind, cfg, ds, gen, gb);
    reports.emplace_back(to_string(kind),
                         evaluate(corrector, model, ds.test, ds.spec.group_size,
                                  cfg.eval.k_values, cfg.eval.top_t_values));
  }
  return reports;
}

namespace {

std::string fmt_full(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

std::string loss_trace_csv(const BganTrainStats& stats) {
  std::ostringstream out;
  out << "iteration,loss_g,loss_d,lr_g,lr_d\n";
  for (std::size_t i = 0; i < stats.loss_g_trace.size(); ++i)
    out << i << ',' << fmt_full(stats.loss_g_trace[i]) << ','
        << fmt_full(stats.loss_d_trace[i]) << ',' << fmt_full(stats.lr_g_trace[i]) << ','
        << fmt_full(stats.lr_d_trace[i]) << '\n';
  return out.str();
}

std::string classic_trace_csv(const Vec& loss_trace) {
  std::ostringstream out;
  out << "iteration,loss\n";
  for (std::size_t i = 0; i < loss_trace.size(); ++i)
    out << i << ',' << fmt_full(loss_trace[i]) << '\n';
  return out.str();
}

}  // namespace sbp
