#include "sbp/config.hpp"

#include <fstream>
#include <set>

#include "sbp/errors.hpp"

namespace sbp {

using nlohmann::json;

namespace {

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& section) {
  if (!j.is_object()) throw UsageError("config: '" + section + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (allowed.find(it.key()) == allowed.end())
      throw UsageError("config: unknown key '" + section + it.key() + "'");
}

template <typename T>
void read_into(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw UsageError(std::string("config: malformed value for '") + key + "'");
  }
}

void read_string_into(const json& j, const char* key, std::string& out) {
  read_into<std::string>(j, key, out);
}

}  // namespace

void ExperimentConfig::validate() const {
  try {
    dataset.validate();
  } catch (const ContractViolation& e) {
    throw UsageError(std::string("config: ") + e.what());
  }
  if (classic.lr <= 0.0) throw UsageError("config: classic.lr must be positive");
  if (classic.batch == 0) throw UsageError("config: classic.batch must be positive");
  bgan.validate();
  if (bias.a < 0.0) throw UsageError("config: bias.a must be >= 0");
  if (bias.eps_glo < 0.0) throw UsageError("config: bias.eps_glo must be >= 0");
  if (bias.eps_c <= 0.0) throw UsageError("config: bias.eps_c must be positive");
  if (bias.phi_variant != PhiVariant::Fc && dataset.ctx_dim % PhiEncoder::kChunks != 0)
    throw UsageError("config: dataset.ctx_dim must be divisible by 8 for transformer phi");
  if (eval.k_values.empty()) throw UsageError("config: eval.k_values must be non-empty");
  for (std::size_t k : eval.k_values)
    if (k < 1) throw UsageError("config: eval.k_values entries must be >= 1");
  for (std::size_t t : eval.top_t_values)
    if (t < 1) throw UsageError("config: eval.top_t_values entries must be >= 1");
  if (eval.correctors.empty()) throw UsageError("config: eval.correctors must be non-empty");
  if (output_dir.empty()) throw UsageError("config: output_dir must be non-empty");
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig cfg;
  reject_unknown_keys(j, {"dataset", "classic", "bgan", "bias", "eval", "seed", "seeds",
                          "output_dir"},
                      "");
  read_into(j, "seed", cfg.seed);
  read_into(j, "seeds", cfg.seeds);
  read_string_into(j, "output_dir", cfg.output_dir);

  if (j.contains("dataset")) {
    const json& d = j.at("dataset");
    reject_unknown_keys(d, {"m_classes", "ctx_dim", "zipf_s", "n_train", "n_test",
                            "group_size", "noise_sigma"},
                        "dataset.");
    read_into(d, "m_classes", cfg.dataset.m_classes);
    read_into(d, "ctx_dim", cfg.dataset.ctx_dim);
    read_into(d, "zipf_s", cfg.dataset.zipf_s);
    read_into(d, "n_train", cfg.dataset.n_train);
    read_into(d, "n_test", cfg.dataset.n_test);
    read_into(d, "group_size", cfg.dataset.group_size);
    read_into(d, "noise_sigma", cfg.dataset.noise_sigma);
  }

  if (j.contains("classic")) {
    const json& c = j.at("classic");
    reject_unknown_keys(c, {"lr", "batch", "iters"}, "classic.");
    read_into(c, "lr", cfg.classic.lr);
    read_into(c, "batch", cfg.classic.batch);
    read_into(c, "iters", cfg.classic.iters);
  }

  if (j.contains("bgan")) {
    const json& b = j.at("bgan");
    reject_unknown_keys(b, {"lr_g", "lr_d", "critic_ratio", "alpha", "clip_c", "iters",
                            "batch", "lr_schedule", "mode", "net_variant", "g_layers",
                            "d_layers", "channels", "ksize"},
                        "bgan.");
    read_into(b, "lr_g", cfg.bgan.lr_g);
    read_into(b, "lr_d", cfg.bgan.lr_d);
    read_into(b, "critic_ratio", cfg.bgan.critic_ratio);
    read_into(b, "alpha", cfg.bgan.alpha);
    read_into(b, "clip_c", cfg.bgan.clip_c);
    read_into(b, "iters", cfg.bgan.iters);
    read_into(b, "batch", cfg.bgan.batch);
    std::string s;
    if (b.contains("lr_schedule")) {
      read_string_into(b, "lr_schedule", s);
      cfg.bgan.lr_schedule = lr_schedule_from_string(s);
    }
    if (b.contains("mode")) {
      read_string_into(b, "mode", s);
      cfg.bgan.mode = train_mode_from_string(s);
    }
    if (b.contains("net_variant")) {
      read_string_into(b, "net_variant", s);
      cfg.bgan.variant = net_variant_from_string(s);
    }
    read_into(b, "g_layers", cfg.bgan.g_layers);
    read_into(b, "d_layers", cfg.bgan.d_layers);
    read_into(b, "channels", cfg.bgan.channels);
    read_into(b, "ksize", cfg.bgan.ksize);
  }

  if (j.contains("bias")) {
    const json& b = j.at("bias");
    reject_unknown_keys(b, {"a", "eps_glo", "eps_c", "phi_variant", "use_global_bias",
                            "scope"},
                        "bias.");
    read_into(b, "a", cfg.bias.a);
    read_into(b, "eps_glo", cfg.bias.eps_glo);
    read_into(b, "eps_c", cfg.bias.eps_c);
    std::string s;
    if (b.contains("phi_variant")) {
      read_string_into(b, "phi_variant", s);
      cfg.bias.phi_variant = phi_variant_from_string(s);
    }
    read_into(b, "use_global_bias", cfg.bias.use_global_bias);
    if (b.contains("scope")) {
      read_string_into(b, "scope", s);
      cfg.bias.scope = scope_from_string(s);
    }
  }

  if (j.contains("eval")) {
    const json& e = j.at("eval");
    reject_unknown_keys(e, {"k_values", "top_t_values", "correctors"}, "eval.");
    read_into(e, "k_values", cfg.eval.k_values);
    read_into(e, "top_t_values", cfg.eval.top_t_values);
    if (e.contains("correctors")) {
      std::vector<std::string> names;
      read_into(e, "correctors", names);
      cfg.eval.correctors.clear();
      for (const std::string& n : names)
        cfg.eval.correctors.push_back(corrector_kind_from_string(n));
    }
  }

  cfg.dataset.scope = cfg.bias.scope;
  cfg.dataset.seed = cfg.seed;
  cfg.validate();
  return cfg;
}

json config_to_json(const ExperimentConfig& cfg) {
  json j;
  j["seed"] = cfg.seed;
  j["seeds"] = cfg.seeds;
  j["output_dir"] = cfg.output_dir;
  j["dataset"] = {{"m_classes", cfg.dataset.m_classes}, {"ctx_dim", cfg.dataset.ctx_dim},
                  {"zipf_s", cfg.dataset.zipf_s},       {"n_train", cfg.dataset.n_train},
                  {"n_test", cfg.dataset.n_test},       {"group_size", cfg.dataset.group_size},
                  {"noise_sigma", cfg.dataset.noise_sigma}};
  j["classic"] = {{"lr", cfg.classic.lr}, {"batch", cfg.classic.batch}, {"iters", cfg.classic.iters}};
  j["bgan"] = {{"lr_g", cfg.bgan.lr_g},
               {"lr_d", cfg.bgan.lr_d},
               {"critic_ratio", cfg.bgan.critic_ratio},
               {"alpha", cfg.bgan.alpha},
               {"clip_c", cfg.bgan.clip_c},
               {"iters", cfg.bgan.iters},
               {"batch", cfg.bgan.batch},
               {"lr_schedule", to_string(cfg.bgan.lr_schedule)},
               {"mode", to_string(cfg.bgan.mode)},
               {"net_variant", to_string(cfg.bgan.variant)},
               {"g_layers", cfg.bgan.g_layers},
               {"d_layers", cfg.bgan.d_layers},
               {"channels", cfg.bgan.channels},
               {"ksize", cfg.bgan.ksize}};
  j["bias"] = {{"a", cfg.bias.a},
               {"eps_glo", cfg.bias.eps_glo},
               {"eps_c", cfg.bias.eps_c},
               {"phi_variant", to_string(cfg.bias.phi_variant)},
               {"use_global_bias", cfg.bias.use_global_bias},
               {"scope", to_string(cfg.bias.scope)}};
  std::vector<std::string> correctors;
  for (CorrectorKind k : cfg.eval.correctors) correctors.push_back(to_string(k));
  j["eval"] = {{"k_values", cfg.eval.k_values},
               {"top_t_values", cfg.eval.top_t_values},
               {"correctors", correctors}};
  return j;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open config file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw UsageError("config file " + path + ": " + e.what());
  }
  return config_from_json(j);
}

}  // namespace sbp
