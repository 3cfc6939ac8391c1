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

#include "core_reg/scm.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "core_reg/error.hpp"

namespace corereg {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Eigen::VectorXd std_normal_vector(std::mt19937_64& rng, Eigen::Index k) {
  std::normal_distribution<double> normal;
  Eigen::VectorXd v(k);
  for (Eigen::Index i = 0; i < k; ++i) v[i] = normal(rng);
  return v;
}

nlohmann::json matrix_to_json(const Eigen::MatrixXd& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(row);
  }
  return rows;
}

Eigen::MatrixXd matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.get<std::vector<std::vector<double>>>();
  if (rows.empty()) return Eigen::MatrixXd(0, 0);
  Eigen::MatrixXd m(static_cast<Eigen::Index>(rows.size()),
                    static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != rows.front().size()) throw DataError("ragged matrix in JSON");
    for (std::size_t c = 0; c < rows[r].size(); ++c)
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  }
  return m;
}

nlohmann::json vector_to_json(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

Eigen::VectorXd vector_from_json(const nlohmann::json& j) {
  const auto xs = j.get<std::vector<double>>();
  return Eigen::Map<const Eigen::VectorXd>(xs.data(), static_cast<Eigen::Index>(xs.size()));
}

std::vector<double> to_std(const Eigen::VectorXd& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

void check_delta(const StyleAwareDataset& sds, const Eigen::VectorXd& delta) {
  if (static_cast<std::size_t>(delta.size()) != sds.style_dim())
    throw DataError("shift has dimension " + std::to_string(delta.size()) +
                    ", style dimension is " + std::to_string(sds.style_dim()));
}

}  // namespace

LinearRenderer::LinearRenderer(Eigen::MatrixXd A, Eigen::MatrixXd W)
    : A_(std::move(A)), W_(std::move(W)) {
  if (A_.rows() != W_.rows()) throw ConfigError("A and W must have the same row count");
  if (W_.rows() == 0) throw ConfigError("renderer needs a positive feature dimension");
}

Eigen::VectorXd LinearRenderer::render(const Eigen::VectorXd& core,
                                       const Eigen::VectorXd& style) const {
  return A_ * core + W_ * style;
}

Eigen::MatrixXd LinearRenderer::style_jacobian(const Eigen::VectorXd&,
                                               const Eigen::VectorXd&) const {
  return W_;
}

nlohmann::json LinearRenderer::to_json() const {
  return {{"kind", "linear"}, {"A", matrix_to_json(A_)}, {"W", matrix_to_json(W_)}};
}

Eigen::VectorXd PolarRenderer::render(const Eigen::VectorXd& core,
                                      const Eigen::VectorXd& style) const {
  return Eigen::Vector2d(core[0] * std::cos(style[0]), core[0] * std::sin(style[0]));
}

Eigen::MatrixXd PolarRenderer::style_jacobian(const Eigen::VectorXd& core,
                                              const Eigen::VectorXd& style) const {
  Eigen::MatrixXd J(2, 1);
  J << -core[0] * std::sin(style[0]), core[0] * std::cos(style[0]);
  return J;
}

nlohmann::json PolarRenderer::to_json() const { return {{"kind", "polar"}}; }

std::shared_ptr<const StyleRenderer> renderer_from_json(const nlohmann::json& j) {
  try {
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "linear")
      return std::make_shared<LinearRenderer>(matrix_from_json(j.at("A")),
                                              matrix_from_json(j.at("W")));
    if (kind == "polar") return std::make_shared<PolarRenderer>();
    throw DataError("unknown renderer kind '" + kind + "'");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid renderer: ") + e.what());
  }
}

void StyleAwareDataset::validate() const {
  if (!renderer) throw DataError("style-aware dataset has no renderer");
  if (latents.size() != data.size())
    throw DataError("latents missing: " + std::to_string(latents.size()) + " latents for " +
                    std::to_string(data.size()) + " samples");
  if (renderer->feature_dim() != data.dim())
    throw DataError("renderer output dimension does not match the data");
  for (const Latent& l : latents)
    if (static_cast<std::size_t>(l.style.size()) != renderer->style_dim() ||
        static_cast<std::size_t>(l.core.size()) != renderer->core_dim())
      throw DataError("latent dimensions do not match the renderer");
  if (style_covariance && (static_cast<std::size_t>(style_covariance->rows()) != style_dim() ||
                           static_cast<std::size_t>(style_covariance->cols()) != style_dim()))
    throw DataError("style covariance has the wrong shape");
}

void LinearScmSpec::validate() const {
  if (q == 0 || q >= p) throw ConfigError("need 0 < q < p");
  if (static_cast<std::size_t>(W.rows()) != p || static_cast<std::size_t>(W.cols()) != q)
    throw ConfigError("W must be p x q");
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(W);
  if (static_cast<std::size_t>(qr.rank()) < q) throw ConfigError("W must have full column rank");
  if (static_cast<std::size_t>(core_mean.size()) != p) throw ConfigError("core_mean must have length p");
  if (static_cast<std::size_t>(style_mean.size()) != q) throw ConfigError("style_mean must have length q");
  if (static_cast<std::size_t>(style_cov.rows()) != q || static_cast<std::size_t>(style_cov.cols()) != q)
    throw ConfigError("style_cov must be q x q");
  Eigen::LLT<Eigen::MatrixXd> llt(style_cov);
  if (llt.info() != Eigen::Success) throw ConfigError("style_cov must be positive definite");
  if (!(prior_positive > 0.0 && prior_positive < 1.0))
    throw ConfigError("prior_positive must lie in (0, 1)");
  if (id_count == 0) throw ConfigError("id_count must be positive");
  if (id_sampler == IdSampler::blocked && group_size == 0)
    throw ConfigError("group_size must be positive");
  if (!(core_scale >= 0.0)) throw ConfigError("core_scale must be >= 0");
}

Eigen::VectorXd LinearScmSpec::core(int y, std::size_t id) const {
  std::uint64_t h = splitmix64(core_seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(y > 0 ? 1 : 2));
  h = splitmix64(h ^ static_cast<std::uint64_t>(id));
  std::mt19937_64 rng(h);
  return static_cast<double>(y) * core_mean +
         core_scale * std_normal_vector(rng, static_cast<Eigen::Index>(p));
}

LinearScmSpec default_linear_scm(std::size_t p, std::size_t q, std::uint64_t seed,
                                 double style_sd) {
  if (q == 0 || q >= p) throw ConfigError("need 0 < q < p");
  std::mt19937_64 rng(splitmix64(seed ^ 0x5c3a));
  const auto P = static_cast<Eigen::Index>(p);
  const auto Q = static_cast<Eigen::Index>(q);
  Eigen::MatrixXd G(P, P);
  for (Eigen::Index c = 0; c < P; ++c) G.col(c) = std_normal_vector(rng, P);
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(G);
  const Eigen::MatrixXd Q_full = qr.householderQ() * Eigen::MatrixXd::Identity(P, P);

  LinearScmSpec s;
  s.p = p;
  s.q = q;
  s.W = Q_full.leftCols(Q);
  s.core_mean = Q_full.col(Q);  // unit length, orthogonal to col(W)
  s.core_scale = 1.0;
  s.core_seed = splitmix64(seed);
  s.style_mean = Eigen::VectorXd::Zero(Q);
  s.style_mean[0] = 0.25;
  s.style_cov = style_sd * style_sd * Eigen::MatrixXd::Identity(Q, Q);
  s.id_count = 2000;
  return s;
}

nlohmann::json to_json(const LinearScmSpec& s) {
  return {{"p", s.p},
          {"q", s.q},
          {"prior_positive", s.prior_positive},
          {"id_count", s.id_count},
          {"id_sampler", s.id_sampler == IdSampler::uniform ? "uniform" : "blocked"},
          {"group_size", s.group_size},
          {"core_mean", vector_to_json(s.core_mean)},
          {"core_scale", s.core_scale},
          {"core_seed", s.core_seed},
          {"style_mean", vector_to_json(s.style_mean)},
          {"style_cov", matrix_to_json(s.style_cov)},
          {"W", matrix_to_json(s.W)}};
}

LinearScmSpec linear_scm_from_json(const nlohmann::json& j) {
  try {
    LinearScmSpec s;
    s.p = j.at("p").get<std::size_t>();
    s.q = j.at("q").get<std::size_t>();
    s.prior_positive = j.at("prior_positive").get<double>();
    s.id_count = j.at("id_count").get<std::size_t>();
    const std::string sampler = j.at("id_sampler").get<std::string>();
    if (sampler == "uniform") s.id_sampler = IdSampler::uniform;
    else if (sampler == "blocked") s.id_sampler = IdSampler::blocked;
    else throw ConfigError("unknown id sampler '" + sampler + "'");
    s.group_size = j.at("group_size").get<std::size_t>();
    s.core_mean = vector_from_json(j.at("core_mean"));
    s.core_scale = j.at("core_scale").get<double>();
    s.core_seed = j.at("core_seed").get<std::uint64_t>();
    s.style_mean = vector_from_json(j.at("style_mean"));
    s.style_cov = matrix_from_json(j.at("style_cov"));
    s.W = matrix_from_json(j.at("W"));
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid linear SCM spec: ") + e.what());
  }
}

StyleAwareDataset sample_linear_scm(const LinearScmSpec& spec, std::size_t n,
                                    const InterventionSpec& intervention, std::uint64_t seed) {
  spec.validate();
  if (n == 0) throw ConfigError("n must be >= 1");
  const auto Q = static_cast<Eigen::Index>(spec.q);
  auto check_q = [&](const Eigen::VectorXd& d) {
    if (d.size() != Q) throw ConfigError("intervention dimension must equal q");
  };
  std::visit(
      [&](const auto& iv) {
        using T = std::decay_t<decltype(iv)>;
        if constexpr (std::is_same_v<T, MeanShift>) check_q(iv.delta);
        if constexpr (std::is_same_v<T, PerClassShift>) {
          if (iv.deltas.size() != 2) throw ConfigError("per-class shift needs two deltas");
          for (const auto& d : iv.deltas) check_q(d);
        }
        if constexpr (std::is_same_v<T, RandomShift>) {
          check_q(iv.mean);
          if (iv.covariance.rows() != Q || iv.covariance.cols() != Q)
            throw ConfigError("random shift covariance must be q x q");
        }
      },
      intervention);

  std::mt19937_64 rng(splitmix64(seed));
  std::bernoulli_distribution coin(spec.prior_positive);
  std::uniform_int_distribution<std::size_t> pick_id(0, spec.id_count - 1);
  const Eigen::MatrixXd L_style = spec.style_cov.llt().matrixL();
  Eigen::MatrixXd L_random;
  if (const auto* rs = std::get_if<RandomShift>(&intervention))
    L_random = rs->covariance.llt().matrixL();

  auto renderer = std::make_shared<LinearRenderer>(
      Eigen::MatrixXd::Identity(static_cast<Eigen::Index>(spec.p),
                                static_cast<Eigen::Index>(spec.p)),
      spec.W);
  std::vector<Sample> samples;
  std::vector<Latent> latents;
  samples.reserve(n);
  latents.reserve(n);
  int block_y = 1;
  for (std::size_t i = 0; i < n; ++i) {
    int y;
    std::size_t id;
    if (spec.id_sampler == IdSampler::blocked) {
      if (i % spec.group_size == 0) block_y = coin(rng) ? 1 : -1;
      y = block_y;
      id = i / spec.group_size;
    } else {
      y = coin(rng) ? 1 : -1;
      id = pick_id(rng);
    }
    Latent lat;
    lat.core = spec.core(y, id);
    lat.style = static_cast<double>(y) * spec.style_mean + L_style * std_normal_vector(rng, Q);
    std::visit(
        [&](const auto& iv) {
          using T = std::decay_t<decltype(iv)>;
          if constexpr (std::is_same_v<T, MeanShift>) lat.style += iv.delta;
          if constexpr (std::is_same_v<T, PerClassShift>) lat.style += iv.deltas[y > 0 ? 1 : 0];
          if constexpr (std::is_same_v<T, RandomShift>)
            lat.style += iv.mean + L_random * std_normal_vector(rng, Q);
        },
        intervention);
    samples.push_back({to_std(renderer->render(lat.core, lat.style)),
                       static_cast<std::size_t>(y > 0 ? 1 : 0), std::to_string(id)});
    latents.push_back(std::move(lat));
  }
  StyleAwareDataset out{Dataset(std::move(samples), spec.p, 2), std::move(latents), renderer,
                        spec.style_cov};
  out.validate();
  return out;
}

namespace {

// Shared layout of the two motivating examples: a base sample per (Y, ID),
// c of which receive a partner with the same core and a different style.
struct PairedDraw {
  std::vector<std::size_t> labels;
  std::vector<Latent> latents;
  std::vector<std::optional<std::string>> ids;
};

template <class CoreFn, class StyleFn, class PartnerFn>
PairedDraw draw_paired(std::size_t n, std::size_t c, std::mt19937_64& rng, CoreFn draw_core,
                       StyleFn draw_style, PartnerFn partner_style) {
  if (n == 0) throw ConfigError("n must be >= 1");
  if (2 * c > n) throw ConfigError("c must be at most n/2");
  const std::size_t m = n - c;
  std::bernoulli_distribution coin(0.5);
  PairedDraw d;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t label = coin(rng) ? 1 : 0;
    d.labels.push_back(label);
    d.latents.push_back({draw_core(label), draw_style(label)});
    d.ids.push_back(std::nullopt);
  }
  std::vector<std::size_t> order(m);
  for (std::size_t i = 0; i < m; ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(c);
  std::sort(order.begin(), order.end());
  for (std::size_t base : order) {
    const std::string id = std::to_string(base);
    d.ids[base] = id;
    d.labels.push_back(d.labels[base]);
    d.latents.push_back({d.latents[base].core, partner_style(d.labels[base], d.latents[base])});
    d.ids.push_back(id);
  }
  return d;
}

StyleAwareDataset assemble(PairedDraw d, std::shared_ptr<const StyleRenderer> renderer,
                           std::optional<Eigen::MatrixXd> cov) {
  std::vector<Sample> samples;
  samples.reserve(d.labels.size());
  for (std::size_t i = 0; i < d.labels.size(); ++i)
    samples.push_back({to_std(renderer->render(d.latents[i].core, d.latents[i].style)),
                       d.labels[i], d.ids[i]});
  StyleAwareDataset out{Dataset(std::move(samples), renderer->feature_dim(), 2),
                        std::move(d.latents), std::move(renderer), std::move(cov)};
  out.validate();
  return out;
}

Eigen::VectorXd scalar(double v) { return Eigen::VectorXd::Constant(1, v); }

}  // namespace

TrainTestPair gen_example1(std::size_t n, std::size_t c, double test_shift, std::uint64_t seed) {
  constexpr double kCoreMean = 1.5, kCoreSd = 0.25, kStyleMean = 1.125, kStyleSd = 1.0;
  Eigen::MatrixXd A(2, 1), W(2, 1);
  A << 0.6, 0.8;
  W << 0.8, -0.6;
  auto renderer = std::make_shared<LinearRenderer>(A, W);
  const Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(1, 1, kStyleSd * kStyleSd);

  auto make = [&](std::size_t size, std::size_t pairs, double shift, std::uint64_t s) {
    std::mt19937_64 rng(splitmix64(s));
    std::normal_distribution<double> normal;
    auto sign = [](std::size_t label) { return label == 1 ? 1.0 : -1.0; };
    auto draw_core = [&](std::size_t label) {
      return scalar(sign(label) * kCoreMean + kCoreSd * normal(rng));
    };
    auto draw_style = [&](std::size_t label) {
      return scalar(-sign(label) * kStyleMean + kStyleSd * normal(rng) +
                    (label == 1 ? shift : 0.0));
    };
    auto partner = [&](std::size_t label, const Latent&) { return draw_style(label); };
    return assemble(draw_paired(size, pairs, rng, draw_core, draw_style, partner), renderer, cov);
  };
  return {make(n, c, 0.0, seed), make(n, 0, test_shift, splitmix64(seed) ^ 0x7e57)};
}

TrainTestPair gen_example2(std::size_t n, std::size_t c, double test_shift, std::uint64_t seed) {
  constexpr double kMargin = 0.3;
  constexpr double pi = std::numbers::pi;
  auto renderer = std::make_shared<PolarRenderer>();

  auto make = [&](std::size_t size, std::size_t pairs, double shift, std::uint64_t s) {
    std::mt19937_64 rng(splitmix64(s));
    std::normal_distribution<double> normal;
    auto draw_core = [&](std::size_t label) {
      return scalar((label == 1 ? 2.0 : 1.0) + 0.1 * normal(rng));
    };
    auto draw_style = [&](std::size_t label) {
      const double lo = label == 1 ? pi + kMargin : kMargin;
      std::uniform_real_distribution<double> angle(lo, lo + pi - 2.0 * kMargin);
      return scalar(angle(rng) + (label == 1 ? shift : 0.0));
    };
    auto partner = [&](std::size_t, const Latent& base) { return scalar(base.style[0] + pi); };
    return assemble(draw_paired(size, pairs, rng, draw_core, draw_style, partner), renderer,
                    std::nullopt);
  };
  return {make(n, c, 0.0, seed), make(n, 0, test_shift, splitmix64(seed) ^ 0x7e57)};
}

Dataset rerender_per_sample(const StyleAwareDataset& sds,
                            const std::vector<Eigen::VectorXd>& deltas) {
  sds.validate();
  if (deltas.size() != sds.data.size())
    throw DataError("need one shift per sample");
  std::vector<Sample> samples = sds.data.samples();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    check_delta(sds, deltas[i]);
    const Latent& l = sds.latents[i];
    samples[i].features = to_std(sds.renderer->render(l.core, l.style + deltas[i]));
  }
  return Dataset(std::move(samples), sds.data.dim(), sds.data.num_classes());
}

Dataset rerender(const StyleAwareDataset& sds, const Eigen::VectorXd& delta) {
  check_delta(sds, delta);
  return rerender_per_sample(sds, std::vector<Eigen::VectorXd>(sds.data.size(), delta));
}

Dataset rerender_per_group(const StyleAwareDataset& sds, const GroupIndex& groups,
                           const std::vector<Eigen::VectorXd>& deltas) {
  if (groups.n() != sds.data.size()) throw DataError("grouping does not match the dataset");
  if (deltas.size() != groups.m()) throw DataError("need one shift per group");
  std::vector<Eigen::VectorXd> per_sample(sds.data.size());
  for (std::size_t i = 0; i < per_sample.size(); ++i) per_sample[i] = deltas[groups.group_of[i]];
  return rerender_per_sample(sds, per_sample);
}

nlohmann::json latents_to_json(const StyleAwareDataset& sds) {
  sds.validate();
  nlohmann::json lat = nlohmann::json::array();
  for (std::size_t i = 0; i < sds.latents.size(); ++i) {
    const Sample& s = sds.data[i];
    lat.push_back({{"core", vector_to_json(sds.latents[i].core)},
                   {"style", vector_to_json(sds.latents[i].style)},
                   {"y", s.label},
                   {"id", s.id ? nlohmann::json(*s.id) : nlohmann::json(nullptr)}});
  }
  nlohmann::json j{{"renderer", sds.renderer->to_json()}, {"latents", lat}};
  j["style_covariance"] =
      sds.style_covariance ? matrix_to_json(*sds.style_covariance) : nlohmann::json(nullptr);
  return j;
}

StyleAwareDataset attach_latents(Dataset data, const nlohmann::json& sidecar) {
  try {
    auto renderer = renderer_from_json(sidecar.at("renderer"));
    std::vector<Latent> latents;
    const auto& arr = sidecar.at("latents");
    if (arr.size() != data.size())
      throw DataError("latents missing: sidecar has " + std::to_string(arr.size()) +
                      " entries for " + std::to_string(data.size()) + " samples");
    for (std::size_t i = 0; i < arr.size(); ++i) {
      const auto& e = arr[i];
      if (e.at("y").get<std::size_t>() != data[i].label)
        throw DataError("sidecar label mismatch at sample " + std::to_string(i));
      latents.push_back({vector_from_json(e.at("core")), vector_from_json(e.at("style"))});
    }
    std::optional<Eigen::MatrixXd> cov;
    if (sidecar.contains("style_covariance") && !sidecar.at("style_covariance").is_null())
      cov = matrix_from_json(sidecar.at("style_covariance"));
    StyleAwareDataset out{std::move(data), std::move(latents), std::move(renderer), cov};
    out.validate();
    return out;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("invalid latent sidecar: ") + e.what());
  }
}

}  // namespace corereg
