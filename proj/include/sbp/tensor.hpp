#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

#include "sbp/errors.hpp"

namespace sbp {

using Vec = std::vector<double>;

// Dense row-major 64-bit tensor. Small and value-semantic; every exported
// numeric operation keeps entries finite.
struct Tensor {
  std::vector<std::size_t> shape;
  Vec data;

  Tensor() = default;
  Tensor(std::vector<std::size_t> s, Vec d) : shape(std::move(s)), data(std::move(d)) {
    if (numel(shape) != data.size())
      throw ContractViolation("Tensor: shape/data size mismatch");
  }

  static Tensor zeros(std::vector<std::size_t> s) {
    std::size_t n = numel(s);
    return Tensor(std::move(s), Vec(n, 0.0));
  }

  static std::size_t numel(const std::vector<std::size_t>& s) {
    std::size_t n = 1;
    for (std::size_t d : s) n *= d;
    return n;
  }

  std::size_t size() const { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape.at(i); }

  double& at(std::size_t i) { return data[i]; }
  double at(std::size_t i) const { return data[i]; }
  double& at(std::size_t i, std::size_t j) { return data[i * shape[1] + j]; }
  double at(std::size_t i, std::size_t j) const { return data[i * shape[1] + j]; }
  double& at(std::size_t i, std::size_t j, std::size_t k) {
    return data[(i * shape[1] + j) * shape[2] + k];
  }
  double at(std::size_t i, std::size_t j, std::size_t k) const {
    return data[(i * shape[1] + j) * shape[2] + k];
  }

  void fill(double v) {
    for (double& x : data) x = v;
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double x : data)
      if (!std::isfinite(x)) return false;
    return true;
  }
};

inline void require_finite(const Tensor& t, const std::string& where) {
  if (!t.all_finite()) throw TrainingDivergence(where + ": non-finite values");
}

inline void require_finite(const Vec& v, const std::string& where) {
  for (double x : v)
    if (!std::isfinite(x)) throw TrainingDivergence(where + ": non-finite values");
}

}  // namespace sbp
