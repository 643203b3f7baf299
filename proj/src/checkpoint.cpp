#include "sbp/checkpoint.hpp"

#include <cinttypes>
#include <cstdio>
#include <fstream>

#include "sbp/errors.hpp"

namespace sbp {

using nlohmann::json;

namespace {

std::string checksum_hex(std::uint64_t h) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016" PRIx64, h);
  return buf;
}

std::uint64_t checksum_from_hex(const std::string& s) {
  std::uint64_t h = 0;
  if (std::sscanf(s.c_str(), "0x%" SCNx64, &h) != 1)
    throw ParseError("checkpoint: malformed param_checksum '" + s + "'");
  return h;
}

}  // namespace

void save_checkpoint(const std::string& path, const std::vector<CheckpointModel>& models,
                     const json& config_snapshot) {
  json file;
  file["format_version"] = 1;
  file["config"] = config_snapshot;
  json jmodels = json::array();
  for (const CheckpointModel& m : models) {
    json layers = json::array();
    for (const Param* p : m.params)
      layers.push_back(json{{"name", p->name}, {"shape", p->value.shape},
                            {"values", p->value.data}});
    jmodels.push_back(json{{"model_kind", m.kind},
                           {"frozen", m.frozen},
                           {"param_checksum", checksum_hex(params_checksum(m.params))},
                           {"layers", layers}});
  }
  file["models"] = jmodels;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot open checkpoint for writing: " + path);
  out << file.dump() << "\n";
}

json read_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open checkpoint: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("checkpoint " + path + ": " + e.what());
  }
  if (!j.contains("format_version") || j.at("format_version").get<int>() != 1)
    throw ParseError("checkpoint " + path + ": unsupported format_version");
  if (!j.contains("models")) throw ParseError("checkpoint " + path + ": missing 'models'");
  return j;
}

bool apply_checkpoint_model(const json& file, const std::string& kind,
                            const ParamRefs& params) {
  const json* found = nullptr;
  for (const json& m : file.at("models"))
    if (m.contains("model_kind") && m.at("model_kind").get<std::string>() == kind) {
      found = &m;
      break;
    }
  if (found == nullptr)
    throw ParseError("checkpoint: no model of kind '" + kind + "'");

  const json& layers = found->at("layers");
  if (!layers.is_array() || layers.size() != params.size())
    throw ParseError("checkpoint: layer count mismatch for '" + kind + "'");
  for (std::size_t i = 0; i < params.size(); ++i) {
    const json& layer = layers.at(i);
    std::string name = layer.at("name").get<std::string>();
    if (name != params[i]->name)
      throw ParseError("checkpoint: layer name mismatch, expected '" + params[i]->name +
                       "' got '" + name + "'");
    auto shape = layer.at("shape").get<std::vector<std::size_t>>();
    if (shape != params[i]->value.shape)
      throw ParseError("checkpoint: shape mismatch for layer '" + name + "'");
    auto values = layer.at("values").get<Vec>();
    if (values.size() != params[i]->value.data.size())
      throw ParseError("checkpoint: value count mismatch for layer '" + name + "'");
    params[i]->value.data = std::move(values);
  }

  std::uint64_t stored = checksum_from_hex(found->at("param_checksum").get<std::string>());
  std::uint64_t actual = params_checksum(params);
  if (stored != actual)
    throw FreezeViolation("checkpoint: checksum mismatch for model '" + kind + "'");

  bool frozen = found->at("frozen").get<bool>();
  if (frozen)
    for (Param* p : params) p->frozen = true;
  return frozen;
}

}  // namespace sbp
