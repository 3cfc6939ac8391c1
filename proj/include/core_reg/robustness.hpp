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

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "core_reg/dataset.hpp"
#include "core_reg/model.hpp"
#include "core_reg/scm.hpp"
#include "json.hpp"

namespace corereg {

// Cov(style | Y, ID) for each group, in GroupIndex order.
struct ConditionalCovariance {
  std::vector<Eigen::MatrixXd> sigma;
  std::vector<bool> spd;
  double zeta = 0.0;  // largest spectral norm over groups

  bool all_spd() const;
};

// Same matrix for every group.
ConditionalCovariance shared_covariance(const Eigen::MatrixXd& sigma, const GroupIndex& groups);

// Population covariance of the style latents within each group. Singleton
// groups fall back to the dataset's ground-truth covariance when present,
// otherwise to the within-group covariance pooled over all larger groups.
ConditionalCovariance estimate_conditional_covariance(const StyleAwareDataset& sds,
                                                      const GroupIndex& groups);

// Per-group style shifts, in GroupIndex order.
using ShiftAssignment = std::vector<Eigen::VectorXd>;

// delta' Sigma^{-1} delta via a Cholesky solve. Throws NumericalError when
// Sigma is not positive definite.
double mahalanobis_cost(const Eigen::VectorXd& delta, const Eigen::MatrixXd& sigma);

// sum_j (n_j / n) delta_j' Sigma_j^{-1} delta_j.
double assignment_cost(const ShiftAssignment& assignment, const ConditionalCovariance& cov,
                       const GroupIndex& groups);

ShiftAssignment zero_assignment(const GroupIndex& groups, std::size_t q);

// Mean loss after shifting every group's style by its assignment.
double loss_under_shift(const ModelSpec& spec, std::span<const double> theta,
                        const StyleAwareDataset& sds, const GroupIndex& groups,
                        const ShiftAssignment& assignment);

enum class WorstCaseMethod { uniform_ball, gradient_allocation, exhaustive_tiny };

std::string to_string(WorstCaseMethod method);
WorstCaseMethod worst_case_method_from_string(const std::string& name);

struct WorstCaseResult {
  double value = 0.0;
  ShiftAssignment assignment;
  // Deterministic per-group shifts only, so the value bounds the supremum
  // from below.
  bool lower_bound = true;
};

// uniform_ball: every group gets the full budget xi on its own Mahalanobis
//   sphere and the direction maximizing its mean loss is searched on a grid
//   (q <= 3) or by projected ascent from random starts (q > 3).
// gradient_allocation: delta_j = sqrt(xi) Sigma_j g_j / sqrt(g_j' Sigma_j g_j)
//   with g_j the gradient of group j's mean loss at zero shift.
// exhaustive_tiny: at most three groups; additionally searches over how the
//   budget is split between groups, subject to sum_j (n_j/n) xi_j = xi.
WorstCaseResult worst_case_loss(const ModelSpec& spec, std::span<const double> theta,
                                const StyleAwareDataset& sds, const GroupIndex& groups,
                                const ConditionalCovariance& cov, double xi,
                                WorstCaseMethod method, std::uint64_t seed = 0);

struct DivergenceResult {
  Eigen::VectorXd direction;
  std::vector<double> magnitudes;
  std::vector<double> losses;
  double unshifted_loss = 0.0;
  // Loss at the largest magnitude exceeds 10x the unshifted loss and the last
  // three losses increase strictly.
  bool unbounded = false;

  std::string verdict() const { return unbounded ? "unbounded" : "bounded"; }
};

DivergenceResult divergence_probe(const ModelSpec& spec, std::span<const double> theta,
                                  const StyleAwareDataset& sds, const Eigen::VectorXd& direction,
                                  std::span<const double> magnitudes);

struct FirstOrderGap {
  double lhs = 0.0;  // gradient_allocation worst case
  double rhs = 0.0;  // unshifted loss + sqrt(xi) * C_{l,1/2}
  double gap = 0.0;
  double penalty = 0.0;  // C_{l,1/2} estimate
};

FirstOrderGap first_order_gap(const ModelSpec& spec, std::span<const double> theta,
                              const StyleAwareDataset& sds, const GroupIndex& groups,
                              const ConditionalCovariance& cov, double xi);

// ||Theta W||_F / ||Theta||_F for the weight matrix Theta of a linear model
// (biases ignored); 0 when the weights vanish.
double invariance_defect(const ModelSpec& spec, std::span<const double> theta,
                         const Eigen::MatrixXd& W);
double invariance_defect(const Eigen::VectorXd& weights, const Eigen::MatrixXd& W);

// Unit-Mahalanobis style direction along which a linear single-logit model's
// logit grows fastest: Sigma W'w / sqrt(w'W Sigma W'w).
Eigen::VectorXd worst_style_direction(const ModelSpec& spec, std::span<const double> theta,
                                      const Eigen::MatrixXd& W, const Eigen::MatrixXd& sigma);

struct RobustnessReport {
  std::vector<double> xi_grid;
  std::vector<double> worst_case;
  WorstCaseMethod method = WorstCaseMethod::gradient_allocation;
  double unshifted_loss = 0.0;
  double first_order_xi = 0.0;
  FirstOrderGap first_order;
  std::optional<double> invariance_defect;
  DivergenceResult divergence;
};

nlohmann::json to_json(const RobustnessReport& report);

}  // namespace corereg
