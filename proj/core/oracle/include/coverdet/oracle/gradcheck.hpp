#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "coverdet/tensor.hpp"

namespace coverdet::oracle {

struct GradCheckOptions {
  double epsilon = 1e-4;
  double tolerance = 1e-3;  // relative error bound
  double floor = 1e-6;      // denominator floor for near-zero derivatives
};

struct GradCheckResult {
  std::string name;
  std::size_t checked = 0;
  std::size_t skipped = 0;  // elements sitting on a kink (relu 0, pooling tie)
  std::size_t failed = 0;   // checked elements at or above tolerance
  double max_rel_error = 0.0;
  bool passed = false;
};

using ScalarFn = std::function<TensorD(std::span<const TensorD>)>;

/// Compares the graph's gradient of fn with central differences, element by
/// element, over every input. An element where the forward and backward
/// one-sided differences disagree is treated as a non-smooth point and
/// skipped. Relative error is |a - n| / max(|a|, |n|, floor).
GradCheckResult check_gradients(const std::string& name, const ScalarFn& fn,
                                std::vector<TensorD> inputs, const GradCheckOptions& options = {});

/// The suite behind `coverdet selftest` and the acceptance gate: every
/// differentiable op plus the full compare/BCE pipeline on a tiny model,
/// each on `instances` seeded random draws.
std::vector<GradCheckResult> run_gradcheck_suite(std::size_t instances = 20,
                                                 std::uint64_t seed = 1234);

}  // namespace coverdet::oracle
