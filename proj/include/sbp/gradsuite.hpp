#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace sbp {

struct GradSuiteCase {
  std::string name;
  double max_rel_err = 0.0;
  std::string worst_param;
  bool pass = false;
};

// Finite-difference verification of every layer type and the full classic,
// generator-loss, and critic-loss graphs on randomized instances.
std::vector<GradSuiteCase> run_gradient_suite(std::uint64_t seed, double tol = 1e-5,
                                              double step = 1e-5);

}  // namespace sbp
