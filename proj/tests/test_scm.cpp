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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "core_reg/error.hpp"
#include "core_reg/scm.hpp"

using namespace corereg;

namespace {

double max_feature_diff(const Dataset& a, const Dataset& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t k = 0; k < a.dim(); ++k) d = std::max(d, std::abs(a[i].features[k] - b[i].features[k]));
  return d;
}

}  // namespace

TEST_CASE("linear scm sampling is deterministic") {
  const auto spec = default_linear_scm(6, 2, 3);
  const auto a = sample_linear_scm(spec, 500, NoIntervention{}, 9);
  const auto b = sample_linear_scm(spec, 500, NoIntervention{}, 9);
  CHECK(a.data == b.data);
  CHECK_FALSE(a.data == sample_linear_scm(spec, 500, NoIntervention{}, 10).data);
  CHECK(a.data.dim() == 6);
  CHECK(build_group_index(a.data).c() > 0);
}

TEST_CASE("spec validation") {
  auto spec = default_linear_scm(6, 2, 3);
  spec.W.setZero();
  CHECK_THROWS_AS(spec.validate(), ConfigError);
  CHECK_THROWS_AS(default_linear_scm(3, 3, 1), ConfigError);
  auto s2 = default_linear_scm(6, 2, 3);
  s2.style_cov(0, 0) = -1.0;
  CHECK_THROWS_AS(s2.validate(), ConfigError);
  auto s3 = default_linear_scm(6, 2, 3);
  CHECK_THROWS_AS(sample_linear_scm(s3, 10, MeanShift{Eigen::VectorXd::Ones(3)}, 0), ConfigError);
}

TEST_CASE("core is a function of (label, id)") {
  const auto spec = default_linear_scm(5, 1, 4);
  const auto d = sample_linear_scm(spec, 3000, NoIntervention{}, 2);
  const auto g = build_group_index(d.data);
  for (const auto& members : g.groups)
    for (std::size_t i : members) CHECK(d.latents[i].core == d.latents[members.front()].core);
}

TEST_CASE("mean shift adds W delta") {
  const auto spec = default_linear_scm(5, 2, 7);
  Eigen::VectorXd delta(2);
  delta << 1.5, -0.5;
  const auto base = sample_linear_scm(spec, 200, NoIntervention{}, 1);
  const auto shifted = sample_linear_scm(spec, 200, MeanShift{delta}, 1);
  const Eigen::VectorXd wd = spec.W * delta;
  for (std::size_t i = 0; i < base.data.size(); ++i)
    for (Eigen::Index k = 0; k < 5; ++k)
      CHECK(shifted.data[i].features[k] - base.data[i].features[k] == doctest::Approx(wd(k)).epsilon(1e-12));
  PerClassShift pc{{Eigen::VectorXd::Zero(2), delta}};
  const auto per = sample_linear_scm(spec, 200, pc, 1);
  for (std::size_t i = 0; i < base.data.size(); ++i) {
    const double expect = base.data[i].label == 1 ? wd(0) : 0.0;
    CHECK(per.data[i].features[0] - base.data[i].features[0] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("re-rendering") {
  const auto spec = default_linear_scm(4, 2, 5);
  const auto sds = sample_linear_scm(spec, 300, NoIntervention{}, 3);
  CHECK(max_feature_diff(rerender(sds, Eigen::VectorXd::Zero(2)), sds.data) < 1e-12);

  Eigen::VectorXd delta(2);
  delta << 2.0, -1.0;
  StyleAwareDataset moved = sds;
  moved.data = rerender(sds, delta);
  for (auto& l : moved.latents) l.style += delta;
  CHECK(max_feature_diff(rerender(moved, -delta), sds.data) < 1e-12);

  const auto g = build_group_index(sds.data);
  std::vector<Eigen::VectorXd> per_group(g.m(), delta);
  CHECK(max_feature_diff(rerender_per_group(sds, g, per_group), moved.data) < 1e-12);
  std::vector<Eigen::VectorXd> per_sample(sds.data.size(), delta);
  CHECK(max_feature_diff(rerender_per_sample(sds, per_sample), moved.data) < 1e-12);
  CHECK_THROWS(rerender(sds, Eigen::VectorXd::Zero(3)));
}

TEST_CASE("conditional style covariance matches the spec") {
  auto spec = default_linear_scm(4, 2, 11);
  spec.style_cov << 1.0, 0.3, 0.3, 0.5;
  const std::size_t n = 100000;
  const auto sds = sample_linear_scm(spec, n, NoIntervention{}, 12);
  const auto g = build_group_index(sds.data);
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(2, 2);
  for (const auto& members : g.groups) {
    Eigen::VectorXd mu = Eigen::VectorXd::Zero(2);
    for (std::size_t i : members) mu += sds.latents[i].style;
    mu /= static_cast<double>(members.size());
    for (std::size_t i : members) s += (sds.latents[i].style - mu) * (sds.latents[i].style - mu).transpose();
  }
  const double dof = static_cast<double>(g.n() - g.m());
  s /= dof;
  // Wishart standard errors: sqrt((S_ij^2 + S_ii S_jj) / dof).
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) {
      const double target = spec.style_cov(i, j);
      const double se = std::sqrt((target * target + spec.style_cov(i, i) * spec.style_cov(j, j)) / dof);
      CHECK(std::abs(s(i, j) - target) <= 3.0 * se);
    }
}

TEST_CASE("json round trips") {
  const auto spec = default_linear_scm(5, 2, 13);
  const auto back = linear_scm_from_json(to_json(spec));
  CHECK(to_json(back) == to_json(spec));
  const auto sds = sample_linear_scm(spec, 50, NoIntervention{}, 2);
  const auto re = attach_latents(sds.data, latents_to_json(sds));
  CHECK(max_feature_diff(rerender(re, Eigen::VectorXd::Zero(2)), sds.data) < 1e-12);
  REQUIRE(re.style_covariance.has_value());
  CHECK(re.style_covariance->isApprox(spec.style_cov));
  const auto small = sample_linear_scm(spec, 40, NoIntervention{}, 2);
  CHECK_THROWS_AS(attach_latents(small.data, latents_to_json(sds)), DataError);
}

TEST_CASE("example generators") {
  const auto [tr, te] = gen_example1(2000, 300, kExample1DefaultShift, 1);
  const auto g = build_group_index(tr.data);
  CHECK(tr.data.size() == 2000);
  CHECK(g.c() == 300);
  CHECK(g.max_group_size() == 2);
  CHECK(te.data.size() == 2000);
  CHECK(build_group_index(te.data).c() == 0);
  CHECK(tr.data.dim() == 2);
  const auto [tr2, te2] = gen_example1(2000, 300, kExample1DefaultShift, 1);
  CHECK(tr2.data == tr.data);
  CHECK(te2.data == te.data);

  const auto [p, t] = gen_example2(200, 10, kExample2DefaultShift, 4);
  CHECK(p.data.size() == 200);
  CHECK(build_group_index(p.data).c() == 10);
  // Paired samples share their radius.
  const auto gp = build_group_index(p.data);
  for (const auto& members : gp.groups) {
    if (members.size() < 2) continue;
    const auto r = [&](std::size_t i) { return std::hypot(p.data[i].features[0], p.data[i].features[1]); };
    CHECK(r(members[0]) == doctest::Approx(r(members[1])).epsilon(1e-12));
  }
  CHECK_THROWS_AS(gen_example1(10, 6, 0.0, 1), ConfigError);
}
