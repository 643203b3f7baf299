#pragma once

#include <string>
#include <utility>
#include <vector>

#include "sbp/bgan.hpp"
#include "sbp/config.hpp"
#include "sbp/metrics.hpp"

namespace sbp {

// Deterministic stage helpers shared by the CLI and the test suites. Every
// stage derives its randomness from cfg.seed through fixed stream tags, so
// stages can be re-run independently and still agree.

Dataset make_dataset(const ExperimentConfig& cfg);

PhiEncoder make_phi(const ExperimentConfig& cfg);

// Prior bias from the empirical train-label frequencies; all-zero when
// use_global_bias is off.
GlobalBias make_global_bias(const ExperimentConfig& cfg, const Dataset& ds);

ClassicTrainResult run_train_classic(const ExperimentConfig& cfg, const Dataset& ds);

BganResult run_train_bgan(const ExperimentConfig& cfg, const Dataset& ds,
                          const ClassicModel& model);

IntegratedResult run_train_integrated(const ExperimentConfig& cfg, const Dataset& ds);

Corrector build_corrector(CorrectorKind kind, const ExperimentConfig& cfg,
                          const Dataset& ds, const Generator* gen, const GlobalBias& gb);

// Evaluates every configured corrector; `gen` may be null when sbp is not in
// the corrector list.
std::vector<std::pair<std::string, MetricsReport>> run_evaluation(
    const ExperimentConfig& cfg, const Dataset& ds, const ClassicModel& model,
    const Generator* gen, const GlobalBias& gb);

std::string loss_trace_csv(const BganTrainStats& stats);
std::string classic_trace_csv(const Vec& loss_trace);

}  // namespace sbp
