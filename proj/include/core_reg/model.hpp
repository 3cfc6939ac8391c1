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
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "core_reg/autodiff.hpp"
#include "core_reg/dataset.hpp"
#include "json.hpp"

namespace corereg {

enum class ModelKind { linear, mlp };
enum class Activation { tanh, relu };

// layer_sizes runs from the input dimension p to the output width (1 for a
// binary single-logit model, K otherwise).
struct ModelSpec {
  ModelKind kind = ModelKind::linear;
  std::vector<std::size_t> layer_sizes;
  Activation activation = Activation::tanh;

  static ModelSpec linear(std::size_t input_dim, std::size_t output_dim = 1);
  static ModelSpec mlp(std::vector<std::size_t> layer_sizes,
                       Activation activation = Activation::tanh);

  void validate() const;
  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }
  std::size_t layer_count() const { return layer_sizes.size() - 1; }
  std::size_t param_count() const;
  // Offset of layer l's weight block in the flat vector; its bias follows
  // immediately after out*in weights.
  std::size_t layer_offset(std::size_t layer) const;

  bool operator==(const ModelSpec&) const = default;
};

// Weights stored row-major as out x in.
struct LayerParams {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  bool operator==(const LayerParams&) const = default;
};

std::vector<LayerParams> unflatten(const ModelSpec& spec, std::span<const double> theta);
std::vector<double> flatten(const ModelSpec& spec, const std::vector<LayerParams>& layers);

// true for weight entries, false for biases.
std::vector<bool> weight_mask(const ModelSpec& spec);

// Glorot-uniform weights, zero biases.
std::vector<double> init_params(const ModelSpec& spec, std::uint64_t seed);

std::vector<double> forward(const ModelSpec& spec, std::span<const double> theta,
                            std::span<const double> x);
std::vector<Var> forward(const ModelSpec& spec, std::span<const Var> theta,
                         std::span<const double> x);
std::vector<Var> forward(const ModelSpec& spec, std::span<const Var> theta,
                         std::span<const Var> x);

// log(1 + exp(-y z)) for y in {-1, +1}.
double logistic_loss(double y, double logit);
Var logistic_loss(double y, const Var& logit);

double softmax_cross_entropy(std::size_t label, std::span<const double> logits);
Var softmax_cross_entropy(std::size_t label, std::span<const Var> logits);

// Logistic loss for single-logit models (label 1 maps to y=+1), softmax
// cross-entropy otherwise.
double sample_loss(std::size_t label, std::span<const double> logits);
Var sample_loss(std::size_t label, std::span<const Var> logits);

std::size_t predict_class(std::span<const double> logits);

// Loss and its gradient with respect to the input features.
std::pair<double, std::vector<double>> loss_input_gradient(const ModelSpec& spec,
                                                           std::span<const double> theta,
                                                           std::span<const double> x,
                                                           std::size_t label);

// Row i holds the logits of sample i.
std::vector<std::vector<double>> all_logits(const ModelSpec& spec, std::span<const double> theta,
                                            const Dataset& data);
std::vector<double> per_sample_losses(const ModelSpec& spec, std::span<const double> theta,
                                      const Dataset& data);
double mean_loss(const ModelSpec& spec, std::span<const double> theta, const Dataset& data);
double error_rate(const ModelSpec& spec, std::span<const double> theta, const Dataset& data);

// Validates that the model accepts this dataset's features and labels.
void check_compatible(const ModelSpec& spec, const Dataset& data);

struct Checkpoint {
  ModelSpec spec;
  std::vector<double> params;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
};

nlohmann::json to_json(const ModelSpec& spec);
ModelSpec model_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const Checkpoint& ckpt);
Checkpoint checkpoint_from_json(const nlohmann::json& j);
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace corereg
