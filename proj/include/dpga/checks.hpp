#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace dpga {

struct CheckResult {
  std::string suite;
  bool passed = false;
  double max_error = 0.0;
  double tolerance = 0.0;
  std::string detail;
};

struct CheckOptions {
  /// Perturbs the analytic gradient fed to the finite-difference suites.
  bool inject_gradient_fault = false;
  std::uint64_t seed = 20240601;
};

/// Self-checks against independent oracles: finite differences, walk path
/// enumeration, mask and codec properties, and the two reduction
/// equivalences (zero correction, synchronous averaging).
std::vector<CheckResult> run_checks(const CheckOptions& options = {});

}  // namespace dpga
