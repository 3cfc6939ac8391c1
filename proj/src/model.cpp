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

#include "core_reg/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "core_reg/error.hpp"

namespace corereg {

ModelSpec ModelSpec::linear(std::size_t input_dim, std::size_t output_dim) {
  ModelSpec s{ModelKind::linear, {input_dim, output_dim}, Activation::tanh};
  s.validate();
  return s;
}

ModelSpec ModelSpec::mlp(std::vector<std::size_t> layer_sizes, Activation activation) {
  ModelSpec s{ModelKind::mlp, std::move(layer_sizes), activation};
  s.validate();
  return s;
}

void ModelSpec::validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("model needs at least input and output sizes");
  if (std::find(layer_sizes.begin(), layer_sizes.end(), 0u) != layer_sizes.end())
    throw ConfigError("layer sizes must be positive");
  if (kind == ModelKind::linear && layer_sizes.size() != 2)
    throw ConfigError("linear model has no hidden layers");
}

std::size_t ModelSpec::param_count() const {
  std::size_t d = 0;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l)
    d += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  return d;
}

std::size_t ModelSpec::layer_offset(std::size_t layer) const {
  std::size_t d = 0;
  for (std::size_t l = 0; l < layer; ++l)
    d += layer_sizes[l] * layer_sizes[l + 1] + layer_sizes[l + 1];
  return d;
}

namespace {

void check_theta(const ModelSpec& spec, std::size_t size) {
  if (size != spec.param_count())
    throw DataError("parameter vector has length " + std::to_string(size) + ", model needs " +
                    std::to_string(spec.param_count()));
}

void check_input(const ModelSpec& spec, std::size_t size) {
  if (size != spec.input_dim())
    throw DataError("input has dimension " + std::to_string(size) + ", model expects " +
                    std::to_string(spec.input_dim()));
}

double activate(Activation a, double z) {
  return a == Activation::tanh ? std::tanh(z) : (z > 0.0 ? z : 0.0);
}

Var activate(Activation a, const Var& z) { return a == Activation::tanh ? tanh(z) : relu(z); }

template <class In>
std::vector<Var> forward_var(const ModelSpec& spec, std::span<const Var> theta,
                             std::span<const In> x) {
  check_theta(spec, theta.size());
  check_input(spec, x.size());
  std::vector<Var> h;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t in = spec.layer_sizes[l];
    const std::size_t out = spec.layer_sizes[l + 1];
    const bool last = l + 1 == spec.layer_count();
    std::vector<Var> next(out);
    for (std::size_t r = 0; r < out; ++r) {
      const auto w = theta.subspan(offset + r * in, in);
      const Var& b = theta[offset + out * in + r];
      Var z = l == 0 ? affine(w, x, b) : affine(w, std::span<const Var>(h), b);
      next[r] = last ? z : activate(spec.activation, z);
    }
    offset += out * in + out;
    h = std::move(next);
  }
  return h;
}

}  // namespace

std::vector<LayerParams> unflatten(const ModelSpec& spec, std::span<const double> theta) {
  check_theta(spec, theta.size());
  std::vector<LayerParams> layers;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    LayerParams p;
    p.in = spec.layer_sizes[l];
    p.out = spec.layer_sizes[l + 1];
    p.weights.assign(theta.begin() + offset, theta.begin() + offset + p.in * p.out);
    offset += p.in * p.out;
    p.bias.assign(theta.begin() + offset, theta.begin() + offset + p.out);
    offset += p.out;
    layers.push_back(std::move(p));
  }
  return layers;
}

std::vector<double> flatten(const ModelSpec& spec, const std::vector<LayerParams>& layers) {
  if (layers.size() != spec.layer_count()) throw DataError("layer count mismatch");
  std::vector<double> theta;
  theta.reserve(spec.param_count());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const LayerParams& p = layers[l];
    if (p.in != spec.layer_sizes[l] || p.out != spec.layer_sizes[l + 1] ||
        p.weights.size() != p.in * p.out || p.bias.size() != p.out)
      throw DataError("layer " + std::to_string(l) + " shape mismatch");
    theta.insert(theta.end(), p.weights.begin(), p.weights.end());
    theta.insert(theta.end(), p.bias.begin(), p.bias.end());
  }
  return theta;
}

std::vector<bool> weight_mask(const ModelSpec& spec) {
  std::vector<bool> mask;
  mask.reserve(spec.param_count());
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    mask.insert(mask.end(), spec.layer_sizes[l] * spec.layer_sizes[l + 1], true);
    mask.insert(mask.end(), spec.layer_sizes[l + 1], false);
  }
  return mask;
}

std::vector<double> init_params(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  std::mt19937_64 rng(seed);
  std::vector<double> theta;
  theta.reserve(spec.param_count());
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t in = spec.layer_sizes[l];
    const std::size_t out = spec.layer_sizes[l + 1];
    const double a = std::sqrt(6.0 / static_cast<double>(in + out));
    std::uniform_real_distribution<double> unif(-a, a);
    for (std::size_t k = 0; k < in * out; ++k) theta.push_back(unif(rng));
    theta.insert(theta.end(), out, 0.0);
  }
  return theta;
}

std::vector<double> forward(const ModelSpec& spec, std::span<const double> theta,
                            std::span<const double> x) {
  check_theta(spec, theta.size());
  check_input(spec, x.size());
  std::vector<double> h(x.begin(), x.end());
  std::vector<double> next;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < spec.layer_count(); ++l) {
    const std::size_t in = spec.layer_sizes[l];
    const std::size_t out = spec.layer_sizes[l + 1];
    const bool last = l + 1 == spec.layer_count();
    next.assign(out, 0.0);
    for (std::size_t r = 0; r < out; ++r) {
      const double* w = theta.data() + offset + r * in;
      double z = theta[offset + out * in + r];
      for (std::size_t k = 0; k < in; ++k) z += w[k] * h[k];
      next[r] = last ? z : activate(spec.activation, z);
    }
    offset += out * in + out;
    h.swap(next);
  }
  return h;
}

std::vector<Var> forward(const ModelSpec& spec, std::span<const Var> theta,
                         std::span<const double> x) {
  return forward_var<double>(spec, theta, x);
}

std::vector<Var> forward(const ModelSpec& spec, std::span<const Var> theta,
                         std::span<const Var> x) {
  return forward_var<Var>(spec, theta, x);
}

double logistic_loss(double y, double logit) {
  const double t = -y * logit;
  return std::max(t, 0.0) + std::log1p(std::exp(-std::abs(t)));
}

Var logistic_loss(double y, const Var& logit) { return softplus(-y * logit); }

double softmax_cross_entropy(std::size_t label, std::span<const double> logits) {
  if (logits.size() < 2) throw DataError("softmax cross-entropy needs K >= 2");
  if (label >= logits.size()) throw DataError("label out of range for logits");
  const double mx = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - mx);
  return mx + std::log(s) - logits[label];
}

Var softmax_cross_entropy(std::size_t label, std::span<const Var> logits) {
  if (logits.size() < 2) throw DataError("softmax cross-entropy needs K >= 2");
  if (label >= logits.size()) throw DataError("label out of range for logits");
  return log_sum_exp(logits) - logits[label];
}

double sample_loss(std::size_t label, std::span<const double> logits) {
  if (logits.size() == 1) return logistic_loss(label == 1 ? 1.0 : -1.0, logits[0]);
  return softmax_cross_entropy(label, logits);
}

Var sample_loss(std::size_t label, std::span<const Var> logits) {
  if (logits.size() == 1) return logistic_loss(label == 1 ? 1.0 : -1.0, logits[0]);
  return softmax_cross_entropy(label, logits);
}

std::size_t predict_class(std::span<const double> logits) {
  if (logits.size() == 1) return logits[0] > 0.0 ? 1 : 0;
  return static_cast<std::size_t>(std::max_element(logits.begin(), logits.end()) -
                                  logits.begin());
}

std::pair<double, std::vector<double>> loss_input_gradient(const ModelSpec& spec,
                                                           std::span<const double> theta,
                                                           std::span<const double> x,
                                                           std::size_t label) {
  const std::vector<Var> params = constants(theta);
  auto objective = [&](std::span<const Var> xv) {
    const std::vector<Var> z = forward(spec, std::span<const Var>(params), xv);
    return sample_loss(label, std::span<const Var>(z));
  };
  return value_and_gradient(objective, x);
}

void check_compatible(const ModelSpec& spec, const Dataset& data) {
  if (data.dim() != spec.input_dim())
    throw DataError("data has " + std::to_string(data.dim()) + " features, model expects " +
                    std::to_string(spec.input_dim()));
  const std::size_t k = spec.output_dim() == 1 ? 2 : spec.output_dim();
  if (data.num_classes() > k)
    throw DataError("data has " + std::to_string(data.num_classes()) +
                    " classes, model supports " + std::to_string(k));
}

std::vector<std::vector<double>> all_logits(const ModelSpec& spec, std::span<const double> theta,
                                            const Dataset& data) {
  check_compatible(spec, data);
  std::vector<std::vector<double>> out;
  out.reserve(data.size());
  for (const Sample& s : data.samples()) out.push_back(forward(spec, theta, s.features));
  return out;
}

std::vector<double> per_sample_losses(const ModelSpec& spec, std::span<const double> theta,
                                      const Dataset& data) {
  check_compatible(spec, data);
  std::vector<double> out;
  out.reserve(data.size());
  for (const Sample& s : data.samples())
    out.push_back(sample_loss(s.label, forward(spec, theta, s.features)));
  return out;
}

double mean_loss(const ModelSpec& spec, std::span<const double> theta, const Dataset& data) {
  const std::vector<double> losses = per_sample_losses(spec, theta, data);
  double s = 0.0;
  for (double l : losses) s += l;
  return s / static_cast<double>(losses.size());
}

double error_rate(const ModelSpec& spec, std::span<const double> theta, const Dataset& data) {
  check_compatible(spec, data);
  std::size_t wrong = 0;
  for (const Sample& s : data.samples())
    if (predict_class(forward(spec, theta, s.features)) != s.label) ++wrong;
  return static_cast<double>(wrong) / static_cast<double>(data.size());
}

nlohmann::json to_json(const ModelSpec& spec) {
  return {{"kind", spec.kind == ModelKind::linear ? "linear" : "mlp"},
          {"layer_sizes", spec.layer_sizes},
          {"activation", spec.activation == Activation::tanh ? "tanh" : "relu"}};
}

ModelSpec model_spec_from_json(const nlohmann::json& j) {
  try {
    ModelSpec spec;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "linear") spec.kind = ModelKind::linear;
    else if (kind == "mlp") spec.kind = ModelKind::mlp;
    else throw ConfigError("unknown model kind '" + kind + "'");
    spec.layer_sizes = j.at("layer_sizes").get<std::vector<std::size_t>>();
    const std::string act = j.value("activation", std::string("tanh"));
    if (act == "tanh") spec.activation = Activation::tanh;
    else if (act == "relu") spec.activation = Activation::relu;
    else throw ConfigError("unknown activation '" + act + "'");
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid model spec: ") + e.what());
  }
}

nlohmann::json to_json(const Checkpoint& ckpt) {
  return {{"spec", to_json(ckpt.spec)},
          {"flat_params", ckpt.params},
          {"seed", ckpt.seed},
          {"step", ckpt.step}};
}

Checkpoint checkpoint_from_json(const nlohmann::json& j) {
  try {
    Checkpoint c;
    c.spec = model_spec_from_json(j.at("spec"));
    c.params = j.at("flat_params").get<std::vector<double>>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.step = j.at("step").get<std::uint64_t>();
    if (c.params.size() != c.spec.param_count())
      throw DataError("checkpoint has " + std::to_string(c.params.size()) +
                      " parameters, spec needs " + std::to_string(c.spec.param_count()));
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid checkpoint: ") + e.what());
  }
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << to_json(ckpt).dump(2) << '\n';
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  }
  return checkpoint_from_json(j);
}

}  // namespace corereg
