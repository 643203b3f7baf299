#include "sbp/dataset.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "sbp/errors.hpp"
#include "sbp/rng.hpp"

namespace sbp {

using nlohmann::json;

std::string to_string(RegionScope s) {
  return s == RegionScope::Union ? "union" : "entire";
}

RegionScope scope_from_string(const std::string& s) {
  if (s == "union") return RegionScope::Union;
  if (s == "entire") return RegionScope::Entire;
  throw UsageError("unknown scope '" + s + "' (expected union|entire)");
}

void DatasetSpec::validate() const {
  if (m_classes < 2) throw ContractViolation("DatasetSpec: m_classes must be >= 2");
  if (ctx_dim == 0) throw ContractViolation("DatasetSpec: ctx_dim must be positive");
  if (zipf_s < 0.0) throw ContractViolation("DatasetSpec: zipf_s must be >= 0");
  if (noise_sigma < 0.0) throw ContractViolation("DatasetSpec: noise_sigma must be >= 0");
  if (n_train == 0 || n_test == 0)
    throw ContractViolation("DatasetSpec: n_train and n_test must be positive");
  if (group_size == 0 || n_test % group_size != 0)
    throw ContractViolation("DatasetSpec: n_test must be divisible by group_size");
}

Vec make_class_weights(std::size_t m, double s) {
  if (m < 2) throw ContractViolation("make_class_weights: need at least 2 classes");
  Vec w(m);
  double total = 0.0;
  for (std::size_t j = 0; j < m; ++j) {
    w[j] = std::pow(static_cast<double>(j + 1), -s);
    total += w[j];
  }
  for (double& v : w) v /= total;
  return w;
}

Vec Dataset::empirical_train_weights() const {
  Vec w(spec.m_classes, 0.0);
  for (const Sample& s : train) w[s.label] += 1.0;
  for (double& v : w) v /= static_cast<double>(train.size());
  return w;
}

namespace {

std::vector<Sample> draw_samples(const DatasetSpec& spec, const Vec& weights,
                                 const std::vector<Vec>& prototypes, std::size_t n,
                                 Rng& rng) {
  std::vector<Sample> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    Sample s;
    s.label = rng.categorical(weights);
    s.group_id = i / spec.group_size;
    s.ctx.resize(spec.feature_dim());
    for (std::size_t d = 0; d < spec.ctx_dim; ++d)
      s.ctx[d] = prototypes[s.label][d] + rng.normal(0.0, spec.noise_sigma);
    // Distractor dimensions carry no label information.
    for (std::size_t d = spec.ctx_dim; d < spec.feature_dim(); ++d)
      s.ctx[d] = rng.normal();
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

Dataset generate(const DatasetSpec& spec) {
  spec.validate();
  Dataset ds;
  ds.spec = spec;
  ds.class_weights = make_class_weights(spec.m_classes, spec.zipf_s);

  Rng rng(spec.seed);
  Rng proto_rng = rng.split(1);
  Rng train_rng = rng.split(2);
  Rng test_rng = rng.split(3);

  ds.prototypes.resize(spec.m_classes);
  for (std::size_t c = 0; c < spec.m_classes; ++c) {
    Vec p(spec.ctx_dim);
    double norm_sq = 0.0;
    for (double& v : p) {
      v = proto_rng.normal();
      norm_sq += v * v;
    }
    double norm = std::sqrt(norm_sq);
    for (double& v : p) v /= norm;
    ds.prototypes[c] = std::move(p);
  }

  ds.train = draw_samples(spec, ds.class_weights, ds.prototypes, spec.n_train, train_rng);
  ds.test = draw_samples(spec, ds.class_weights, ds.prototypes, spec.n_test, test_rng);
  return ds;
}

namespace {

json spec_to_json(const DatasetSpec& s) {
  return json{{"m_classes", s.m_classes}, {"ctx_dim", s.ctx_dim},
              {"zipf_s", s.zipf_s},       {"n_train", s.n_train},
              {"n_test", s.n_test},       {"group_size", s.group_size},
              {"noise_sigma", s.noise_sigma}, {"scope", to_string(s.scope)},
              {"seed", s.seed}};
}

template <typename T>
T get_field(const json& j, const char* field) {
  if (!j.contains(field)) throw ParseError(std::string("dataset file: missing field '") + field + "'");
  try {
    return j.at(field).get<T>();
  } catch (const json::exception&) {
    throw ParseError(std::string("dataset file: malformed field '") + field + "'");
  }
}

DatasetSpec spec_from_json(const json& j) {
  DatasetSpec s;
  s.m_classes = get_field<std::size_t>(j, "m_classes");
  s.ctx_dim = get_field<std::size_t>(j, "ctx_dim");
  s.zipf_s = get_field<double>(j, "zipf_s");
  s.n_train = get_field<std::size_t>(j, "n_train");
  s.n_test = get_field<std::size_t>(j, "n_test");
  s.group_size = get_field<std::size_t>(j, "group_size");
  s.noise_sigma = get_field<double>(j, "noise_sigma");
  s.scope = scope_from_string(get_field<std::string>(j, "scope"));
  s.seed = get_field<std::uint64_t>(j, "seed");
  return s;
}

json samples_to_json(const std::vector<Sample>& samples) {
  json arr = json::array();
  for (const Sample& s : samples)
    arr.push_back(json{{"ctx", s.ctx}, {"group_id", s.group_id}, {"label", s.label}});
  return arr;
}

std::vector<Sample> samples_from_json(const json& arr, const DatasetSpec& spec,
                                      const char* which) {
  if (!arr.is_array()) throw ParseError(std::string("dataset file: '") + which + "' is not an array");
  std::vector<Sample> out;
  out.reserve(arr.size());
  for (const json& j : arr) {
    Sample s;
    s.ctx = get_field<Vec>(j, "ctx");
    s.group_id = get_field<std::size_t>(j, "group_id");
    s.label = get_field<std::size_t>(j, "label");
    if (s.label >= spec.m_classes)
      throw ParseError(std::string("dataset file: '") + which + "' sample label out of range");
    if (s.ctx.size() != spec.feature_dim())
      throw ParseError(std::string("dataset file: '") + which + "' sample ctx has wrong length");
    require_finite(s.ctx, "load_dataset ctx");
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace

void save_dataset(const Dataset& ds, const std::string& path) {
  json j{{"format_version", 1},
         {"spec", spec_to_json(ds.spec)},
         {"class_weights", ds.class_weights},
         {"prototypes", ds.prototypes},
         {"train", samples_to_json(ds.train)},
         {"test", samples_to_json(ds.test)}};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw UsageError("cannot open dataset file for writing: " + path);
  out << j.dump() << "\n";
}

Dataset load_dataset(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open dataset file: " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ParseError("dataset file " + path + ": " + e.what());
  }
  Dataset ds;
  if (!j.contains("spec")) throw ParseError("dataset file: missing field 'spec'");
  ds.spec = spec_from_json(j.at("spec"));
  ds.spec.validate();
  ds.class_weights = get_field<Vec>(j, "class_weights");
  if (ds.class_weights.size() != ds.spec.m_classes)
    throw ParseError("dataset file: 'class_weights' has wrong length");
  ds.prototypes = get_field<std::vector<Vec>>(j, "prototypes");
  if (ds.prototypes.size() != ds.spec.m_classes)
    throw ParseError("dataset file: 'prototypes' has wrong length");
  if (!j.contains("train")) throw ParseError("dataset file: missing field 'train'");
  if (!j.contains("test")) throw ParseError("dataset file: missing field 'test'");
  ds.train = samples_from_json(j.at("train"), ds.spec, "train");
  ds.test = samples_from_json(j.at("test"), ds.spec, "test");
  if (ds.train.size() != ds.spec.n_train) throw ParseError("dataset file: 'train' size mismatch");
  if (ds.test.size() != ds.spec.n_test) throw ParseError("dataset file: 'test' size mismatch");
  return ds;
}

}  // namespace sbp
