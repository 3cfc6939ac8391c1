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
#include <memory>
#include <optional>
#include <utility>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "core_reg/dataset.hpp"
#include "json.hpp"

namespace corereg {

struct Latent {
  Eigen::VectorXd core;
  Eigen::VectorXd style;
};

// The image map X = k_x(core, style) together with its style Jacobian.
class StyleRenderer {
 public:
  virtual ~StyleRenderer() = default;
  virtual std::size_t feature_dim() const = 0;
  virtual std::size_t core_dim() const = 0;
  virtual std::size_t style_dim() const = 0;
  virtual Eigen::VectorXd render(const Eigen::VectorXd& core,
                                 const Eigen::VectorXd& style) const = 0;
  // d x / d style, feature_dim x style_dim.
  virtual Eigen::MatrixXd style_jacobian(const Eigen::VectorXd& core,
                                         const Eigen::VectorXd& style) const = 0;
  virtual nlohmann::json to_json() const = 0;
};

// x = A core + W style.
class LinearRenderer final : public StyleRenderer {
 public:
  LinearRenderer(Eigen::MatrixXd A, Eigen::MatrixXd W);
  std::size_t feature_dim() const override { return static_cast<std::size_t>(W_.rows()); }
  std::size_t core_dim() const override { return static_cast<std::size_t>(A_.cols()); }
  std::size_t style_dim() const override { return static_cast<std::size_t>(W_.cols()); }
  Eigen::VectorXd render(const Eigen::VectorXd& core, const Eigen::VectorXd& style) const override;
  Eigen::MatrixXd style_jacobian(const Eigen::VectorXd& core,
                                 const Eigen::VectorXd& style) const override;
  nlohmann::json to_json() const override;
  const Eigen::MatrixXd& A() const { return A_; }
  const Eigen::MatrixXd& W() const { return W_; }

 private:
  Eigen::MatrixXd A_;
  Eigen::MatrixXd W_;
};

// core = (radius), style = (angle); x = radius * (cos angle, sin angle).
class PolarRenderer final : public StyleRenderer {
 public:
  std::size_t feature_dim() const override { return 2; }
  std::size_t core_dim() const override { return 1; }
  std::size_t style_dim() const override { return 1; }
  Eigen::VectorXd render(const Eigen::VectorXd& core, const Eigen::VectorXd& style) const override;
  Eigen::MatrixXd style_jacobian(const Eigen::VectorXd& core,
                                 const Eigen::VectorXd& style) const override;
  nlohmann::json to_json() const override;
};

std::shared_ptr<const StyleRenderer> renderer_from_json(const nlohmann::json& j);

// Observed data plus the latents needed to re-render it under style shifts.
struct StyleAwareDataset {
  Dataset data;
  std::vector<Latent> latents;
  std::shared_ptr<const StyleRenderer> renderer;
  // Ground-truth Cov(style | Y, ID), shared by all groups, when known.
  std::optional<Eigen::MatrixXd> style_covariance;

  std::size_t style_dim() const { return renderer->style_dim(); }
  void validate() const;
};

struct NoIntervention {};
struct MeanShift {
  Eigen::VectorXd delta;
};
// deltas[label] is added to the style of samples with that label.
struct PerClassShift {
  std::vector<Eigen::VectorXd> deltas;
};
// Independent Gaussian shift per sample.
struct RandomShift {
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};
using InterventionSpec = std::variant<NoIntervention, MeanShift, PerClassShift, RandomShift>;

enum class IdSampler {
  uniform,  // ID uniform over id_count independently per sample
  blocked   // consecutive blocks of group_size samples share one (Y, ID)
};

// Partially linear model:
//   Y uniform on {-1, +1} with P(Y = +1) = prior_positive
//   core = Y core_mean + core_scale z(Y, ID),  z hash-seeded standard normal
//   style = Y style_mean + chol(style_cov) eps
//   X = core + W style
// Label 1 encodes Y = +1.
struct LinearScmSpec {
  std::size_t p = 10;
  std::size_t q = 2;
  double prior_positive = 0.5;
  std::size_t id_count = 1000;
  IdSampler id_sampler = IdSampler::uniform;
  std::size_t group_size = 2;
  Eigen::VectorXd core_mean;
  double core_scale = 1.0;
  std::uint64_t core_seed = 0;
  Eigen::VectorXd style_mean;
  Eigen::MatrixXd style_cov;
  Eigen::MatrixXd W;

  void validate() const;
  Eigen::VectorXd core(int y, std::size_t id) const;
};

// Model-I instance with orthonormal W, core mean orthogonal to col(W), and a
// style mean that makes the style predictive of Y during training.
LinearScmSpec default_linear_scm(std::size_t p, std::size_t q, std::uint64_t seed,
                                 double style_sd = 1.0);

nlohmann::json to_json(const LinearScmSpec& spec);
LinearScmSpec linear_scm_from_json(const nlohmann::json& j);

StyleAwareDataset sample_linear_scm(const LinearScmSpec& spec, std::size_t n,
                                    const InterventionSpec& intervention, std::uint64_t seed);

using TrainTestPair = std::pair<StyleAwareDataset, StyleAwareDataset>;

// Linear-direction example: core along (0.6, 0.8), style along (1, -0.75)/1.25.
// c training samples get a partner sharing core and (Y, ID) with a fresh
// style draw. The test set (no ids) adds test_shift to the style of class 1.
TrainTestPair gen_example1(std::size_t n, std::size_t c, double test_shift, std::uint64_t seed);
inline constexpr double kExample1DefaultShift = 12.0;

// Polar example: radius is the core, the angle is the style. Training angles
// lie on class-dependent half-circles; the test set rotates class 1 by
// test_shift radians.
TrainTestPair gen_example2(std::size_t n, std::size_t c, double test_shift, std::uint64_t seed);
inline constexpr double kExample2DefaultShift = 3.14159265358979323846;

Dataset rerender(const StyleAwareDataset& sds, const Eigen::VectorXd& delta);
Dataset rerender_per_sample(const StyleAwareDataset& sds,
                            const std::vector<Eigen::VectorXd>& deltas);
// deltas[j] applies to every member of groups.groups[j].
Dataset rerender_per_group(const StyleAwareDataset& sds, const GroupIndex& groups,
                           const std::vector<Eigen::VectorXd>& deltas);

// Sidecar with the renderer, style covariance and per-sample latents.
nlohmann::json latents_to_json(const StyleAwareDataset& sds);
StyleAwareDataset attach_latents(Dataset data, const nlohmann::json& sidecar);

}  // namespace corereg
