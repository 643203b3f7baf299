#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbp/bgan.hpp"
#include "sbp/classic.hpp"
#include "sbp/dataset.hpp"
#include "sbp/metrics.hpp"

namespace sbp {

struct BiasConfig {
  double a = 1.0;
  double eps_glo = 0.001;
  double eps_c = 0.0001;
  PhiVariant phi_variant = PhiVariant::Trans1;
  bool use_global_bias = true;
  RegionScope scope = RegionScope::Union;
};

struct EvalConfig {
  std::vector<std::size_t> k_values{1, 5};
  std::vector<std::size_t> top_t_values{1, 3};
  std::vector<CorrectorKind> correctors{
      CorrectorKind::Identity, CorrectorKind::PosteriorDivide,
      CorrectorKind::ResistanceSubtract, CorrectorKind::Sbp};
};

// One experiment = one config file. Every field has a default; unknown keys
// are rejected. The dataset's scope and seed are taken from `bias.scope` and
// the top-level `seed`, so each knob has a single source of truth.
struct ExperimentConfig {
  DatasetSpec dataset;
  ClassicHyper classic;
  BganHyper bgan;
  BiasConfig bias;
  EvalConfig eval;
  std::uint64_t seed = 1;
  std::vector<std::uint64_t> seeds{1, 2, 3};  // used by the compare command
  std::string output_dir = "out";

  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const ExperimentConfig& cfg);

ExperimentConfig load_config(const std::string& path);

}  // namespace sbp
