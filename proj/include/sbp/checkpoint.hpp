#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "sbp/nn.hpp"

namespace sbp {

struct CheckpointModel {
  std::string kind;  // "classic" | "generator" | "critic"
  bool frozen = false;
  ParamRefs params;
};

// One file can carry several models (a BGAN checkpoint holds generator and
// critic). Values are serialized with full 64-bit round-trip precision and
// each model carries a checksum that load verifies.
void save_checkpoint(const std::string& path, const std::vector<CheckpointModel>& models,
                     const nlohmann::json& config_snapshot);

nlohmann::json read_checkpoint(const std::string& path);

// Copies the named model's parameters into `params` (names and shapes must
// match), verifies the stored checksum, and returns the frozen flag.
bool apply_checkpoint_model(const nlohmann::json& file, const std::string& kind,
                            const ParamRefs& params);

}  // namespace sbp
