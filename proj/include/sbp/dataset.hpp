#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sbp/tensor.hpp"

namespace sbp {

enum class RegionScope { Union, Entire };

std::string to_string(RegionScope s);
RegionScope scope_from_string(const std::string& s);

struct DatasetSpec {
  std::size_t m_classes = 20;
  std::size_t ctx_dim = 32;       // informative feature dimensions
  double zipf_s = 1.5;            // skew exponent; 0 = uniform
  std::size_t n_train = 20000;
  std::size_t n_test = 5000;
  std::size_t group_size = 8;     // samples per synthetic "image"
  double noise_sigma = 0.15;
  RegionScope scope = RegionScope::Union;
  std::uint64_t seed = 1;

  // Entire-scope samples carry ctx_dim extra label-independent dimensions.
  std::size_t feature_dim() const {
    return scope == RegionScope::Entire ? 2 * ctx_dim : ctx_dim;
  }

  void validate() const;
};

struct Sample {
  Vec ctx;
  std::size_t group_id = 0;
  std::size_t label = 0;
};

struct Dataset {
  DatasetSpec spec;
  Vec class_weights;               // descending, sums to 1
  std::vector<Vec> prototypes;     // one unit-norm vector per class
  std::vector<Sample> train;
  std::vector<Sample> test;

  std::size_t n_groups() const { return test.size() / spec.group_size; }
  Vec empirical_train_weights() const;
};

// weights[j] proportional to 1/(j+1)^s, normalized; m >= 2.
Vec make_class_weights(std::size_t m, double s);

Dataset generate(const DatasetSpec& spec);

void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace sbp
