// Copyright 2026 The core-reg Authors
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

#pragma once

#include <span>
#include <vector>

#include "core_reg/autodiff.hpp"
#include "core_reg/dataset.hpp"

namespace corereg {

enum class PenaltyTarget { prediction, loss };

struct PenaltyConfig {
  PenaltyTarget target = PenaltyTarget::prediction;
  double exponent = 1.0;  // nu, 0.5 or 1
  double weight = 0.0;    // lambda
  double ridge = 0.0;     // gamma

  void validate() const;
};

// (1/m) sum_j [ (1/|S_j|) sum_{i in S_j} (v_i - mean_j)^2 ]^nu.
// Singleton groups contribute 0; the result is 0 when every group is a singleton.
double conditional_penalty(std::span<const double> values, const GroupIndex& groups, double nu);
Var conditional_penalty(std::span<const Var> values, const GroupIndex& groups, double nu);

// Prediction penalty for multi-output logits: sum over coordinates.
// logits[i] holds the logits of sample i.
double prediction_penalty(const std::vector<std::vector<double>>& logits,
                          const GroupIndex& groups, double nu);

// Mean within-group variance over the population variance of the m group
// means. Throws DegenerateVarianceError when the group means coincide.
double variance_ratio(std::span<const double> values, const GroupIndex& groups);

struct VarianceDecomposition {
  double total = 0.0;
  double within = 0.0;   // sum_j (n_j/n) Var_j
  double between = 0.0;  // sum_j (n_j/n) (mean_j - mean)^2
};
VarianceDecomposition variance_decomposition(std::span<const double> values,
                                             const GroupIndex& groups);

// One group per label value present, ordered by label.
GroupIndex baseline_group_by_label(const Dataset& data);

// Population variance of all values.
double baseline_unconditional(std::span<const double> values);

}  // namespace corereg
