// Copyright 2026 The TargetDrop Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Central finite-difference checks of every analytic backward pass.
//
// Each check draws random operands in [-1, 1], contracts the operation's
// output with a random cotangent r to get a scalar L = <r, f(x)>, and
// compares the analytic gradient of L with central differences
// (L(x + eps e_i) - L(x - eps e_i)) / (2 eps). The error of a trial is
// |g_analytic - g_numeric| / max(|g_analytic|, |g_numeric|) in the
// Euclidean norm; a check passes when its worst trial is within tolerance.

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace targetdrop {

struct GradCheckOptions {
  double eps = 1e-3;
  std::size_t trials = 50;
  double op_tolerance = 1e-4;
  double network_tolerance = 1e-3;
  std::uint64_t seed = 7;
  /// Test hook: name of a check whose analytic gradient is deliberately
  /// scaled by 1.01 before comparison (negative control). Empty = none.
  std::string inject_fault;
};

struct GradCheckResult {
  std::string name;
  std::size_t trials = 0;
  double max_rel_error = 0.0;
  double tolerance = 0.0;
  bool passed = false;
};

/// Names of the checks, in run order.
std::vector<std::string> gradcheck_names();

GradCheckResult run_gradcheck(const std::string& name, const GradCheckOptions& opts);
std::vector<GradCheckResult> run_gradcheck_suite(const GradCheckOptions& opts);

}  // namespace targetdrop
