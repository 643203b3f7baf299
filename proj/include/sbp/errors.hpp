#pragma once

#include <stdexcept>
#include <string>

namespace sbp {

// Shape mismatches, out-of-range arguments, broken type invariants.
struct ContractViolation : std::runtime_error {
  explicit ContractViolation(const std::string& what) : std::runtime_error(what) {}
};

// Optimizer touched a frozen parameter set, or a frozen checksum changed.
struct FreezeViolation : std::runtime_error {
  explicit FreezeViolation(const std::string& what) : std::runtime_error(what) {}
};

// Non-finite loss or parameter update during training.
struct TrainingDivergence : std::runtime_error {
  explicit TrainingDivergence(const std::string& what) : std::runtime_error(what) {}
};

// Malformed dataset / checkpoint / config file.
struct ParseError : std::runtime_error {
  explicit ParseError(const std::string& what) : std::runtime_error(what) {}
};

// Bad command line or config values.
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sbp
