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
#include <functional>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "core_reg/autodiff.hpp"
#include "core_reg/dataset.hpp"
#include "core_reg/model.hpp"
#include "core_reg/penalty.hpp"
#include "json.hpp"

namespace corereg {

struct SgdConfig {
  double lr = 0.01;
  double momentum = 0.0;
};

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

using OptimizerConfig = std::variant<SgdConfig, AdamConfig>;

// Which samples of a batch share a penalty group. by_id is the CoRe grouping
// on (label, id); by_label and all are comparison baselines. Batches are
// always formed from the (label, id) groups.
enum class PenaltyGrouping { by_id, by_label, all };

struct TrainConfig {
  PenaltyConfig penalty;
  OptimizerConfig optimizer = AdamConfig{};
  std::size_t batch_size = 120;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;
  PenaltyGrouping grouping = PenaltyGrouping::by_id;

  // Throws ConfigError on invalid settings, including a group larger than
  // the batch size.
  void validate(const GroupIndex& groups) const;
};

// Diagnostics from a full pass over the training data after an epoch.
// penalty is the unweighted estimate over all groups, ridge is ||weights||^2.
struct EpochMetrics {
  double loss = 0.0;
  double penalty = 0.0;
  double ridge = 0.0;
  double train_error = 0.0;
};

struct TrainReport {
  std::vector<double> theta;
  std::vector<EpochMetrics> history;
  std::uint64_t steps = 0;
};

// Called after every optimizer step with the updated parameters.
using StepObserver = std::function<void(std::uint64_t step, std::span<const double> theta)>;

// Sum of squared weights; biases are excluded.
double ridge_value(const ModelSpec& spec, std::span<const double> theta);
Var ridge_value(const ModelSpec& spec, std::span<const Var> theta);

// Mean loss over the batch plus gamma * ||weights||^2.
double pooled_objective(const ModelSpec& spec, std::span<const double> theta,
                        const Dataset& data, std::span<const std::size_t> batch, double gamma);
Var pooled_objective(const ModelSpec& spec, std::span<const Var> theta, const Dataset& data,
                     std::span<const std::size_t> batch, double gamma);

// Pooled objective plus lambda times the conditional penalty over
// batch_groups, whose indices are positions within batch. With lambda = 0,
// or when no group in the batch has two members, this is exactly the pooled
// objective.
double core_objective(const ModelSpec& spec, std::span<const double> theta, const Dataset& data,
                      std::span<const std::size_t> batch, const GroupIndex& batch_groups,
                      const PenaltyConfig& config);
Var core_objective(const ModelSpec& spec, std::span<const Var> theta, const Dataset& data,
                   std::span<const std::size_t> batch, const GroupIndex& batch_groups,
                   const PenaltyConfig& config);

// Penalty over the full data set with the configured target and exponent.
double full_penalty(const ModelSpec& spec, std::span<const double> theta, const Dataset& data,
                    const GroupIndex& groups, const PenaltyConfig& config);

// Shuffles whole groups with a generator seeded from (seed, epoch) and packs
// them greedily into batches of at most batch_size samples. Indices within a
// batch are sorted.
std::vector<std::vector<std::size_t>> group_aware_minibatches(const GroupIndex& groups,
                                                              std::size_t batch_size,
                                                              std::uint64_t seed,
                                                              std::uint64_t epoch);

// Groups restricted to a batch, indexed by position in the batch. Members of
// groups that are only partly inside the batch become singletons.
GroupIndex batch_group_index(const GroupIndex& groups, std::span<const std::size_t> batch);

// Grouping of the whole data set used for the penalty under the given mode.
GroupIndex penalty_groups(const Dataset& data, const GroupIndex& id_groups,
                          PenaltyGrouping mode);

TrainReport train(const Dataset& data, const GroupIndex& groups, const ModelSpec& spec,
                  const TrainConfig& config,
                  std::optional<std::vector<double>> initial_theta = std::nullopt,
                  const StepObserver& observer = {});

// Trains a linear model restricted to weights orthogonal to col(W). The
// weights are parameterized as P phi with P an orthonormal basis of the
// complement from a QR factorization of W. Only the pooled part of the
// objective is used.
TrainReport oracle_train_constrained(const Dataset& data, const GroupIndex& groups,
                                     const ModelSpec& spec, const Eigen::MatrixXd& W,
                                     const TrainConfig& config);

// Orthonormal basis (p x (p-q)) of the orthogonal complement of col(W).
Eigen::MatrixXd orthogonal_complement(const Eigen::MatrixXd& W);

struct LambdaGridEntry {
  double lambda = 0.0;
  double validation_loss = 0.0;
  double validation_error = 0.0;
};

struct LambdaGridResult {
  std::vector<LambdaGridEntry> entries;
  // Largest lambda whose validation loss stays within (1 + tolerance) of the
  // best loss on the grid.
  double recommended = 0.0;
};

LambdaGridResult lambda_grid(const Dataset& train_data, const GroupIndex& groups,
                             const Dataset& validation, const ModelSpec& spec,
                             const TrainConfig& base, std::span<const double> lambdas,
                             double tolerance = 0.1);

nlohmann::json to_json(const TrainConfig& config);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const TrainReport& report);

}  // namespace corereg
