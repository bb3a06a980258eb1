// Copyright 2026 The VAP Authors.
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
//
// Central finite-difference audit of every backward pass.  Layer checks
// probe each input/parameter element of small random instances; the two
// whole-model checks probe a parameter sample of the joint loss at
// operating points engineered to sit inside one linear region of the
// relu/pool switching (a probe that crosses a kink measures neither
// side's gradient, so random operating points would report false alarms).

#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace vap {

struct GradCheckEntry {
  std::string name;          // e.g. "conv3d/weights", "model/pooled"
  double max_rel_err = 0.0;  // worst element across all instances
  double tolerance = 0.0;
  bool pass = false;
};

struct GradCheckOptions {
  uint64_t seed = 7;
  int instances = 4;       // random instances per check
  double layer_tol = 1e-3;
  double model_tol = 1e-2;
  // Test hook: the named check's analytic gradient is deliberately skewed
  // so the audit must fail there; ArgumentError if it names no check.
  std::string perturb;
};

// Runs every check and reports one entry per check, in a fixed order.
std::vector<GradCheckEntry> run_gradient_checks(const GradCheckOptions& opt);

bool gradcheck_passed(const std::vector<GradCheckEntry>& entries);

// Names of all checks, in report order (valid --perturb targets).
std::vector<std::string> gradcheck_names();

}  // namespace vap
