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
#include <random>
#include <string>
#include <vector>

#include "core_reg/dataset.hpp"
#include "core_reg/error.hpp"

using namespace corereg;

namespace {

Dataset make(const std::vector<std::size_t>& labels, const std::vector<std::optional<std::string>>& ids) {
  std::vector<Sample> s;
  for (std::size_t i = 0; i < labels.size(); ++i)
    s.push_back({{static_cast<double>(i)}, labels[i], ids[i]});
  return Dataset(std::move(s), 1, 2);
}

}  // namespace

TEST_CASE("grouping on (label, id)") {
  const auto d = make({1, 1, 0, 1, 0}, {"a", "a", "b", std::nullopt, std::nullopt});
  const auto g = build_group_index(d);
  CHECK(g.m() == 4);
  CHECK(g.c() == 1);
  CHECK(g.groups[0] == std::vector<std::size_t>{0, 1});
  CHECK(g.groups[1] == std::vector<std::size_t>{2});
  CHECK(g.groups[2] == std::vector<std::size_t>{3});
  CHECK(g.groups[3] == std::vector<std::size_t>{4});
  CHECK(g.group_of == std::vector<std::size_t>{0, 0, 1, 2, 3});
  CHECK(g.max_group_size() == 2);
  CHECK(g.non_singleton_count() == 1);
}

TEST_CASE("absent ids give singletons") {
  const auto d = make(std::vector<std::size_t>(7, 0), std::vector<std::optional<std::string>>(7));
  const auto g = build_group_index(d);
  CHECK(g.m() == 7);
  CHECK(g.c() == 0);
}

TEST_CASE("same id with different labels is two groups") {
  CHECK(build_group_index(make({1, 1}, {"a", "a"})).m() == 1);
  CHECK(build_group_index(make({1, 0}, {"a", "a"})).m() == 2);
}

TEST_CASE("explicit groups must partition the indices") {
  CHECK(group_index_from_groups({{0, 2}, {1}}, 3).c() == 1);
  CHECK_THROWS_AS(group_index_from_groups({{0, 1}}, 3), DataError);
  CHECK_THROWS_AS(group_index_from_groups({{0, 1}, {1, 2}}, 3), DataError);
  CHECK_THROWS_AS(group_index_from_groups({{0, 3}, {1, 2}}, 3), DataError);
  CHECK_THROWS_AS(group_index_from_groups({{0, 1}, {}, {2}}, 3), DataError);
}

TEST_CASE("dataset validation") {
  CHECK_THROWS_AS(Dataset({}, 1, 2), DataError);
  CHECK_THROWS_AS(Dataset({{{1.0, 2.0}, 0, {}}}, 1, 2), DataError);
  CHECK_THROWS_AS(Dataset({{{1.0}, 2, {}}}, 1, 2), DataError);
  CHECK_THROWS_AS(Dataset({{{1.0}, 0, {}}}, 1, 1), DataError);
}

TEST_CASE("augmentation") {
  std::vector<Sample> s;
  for (int i = 0; i < 5; ++i) s.push_back({{1.0 * i, 0.0}, static_cast<std::size_t>(i % 2), std::nullopt});
  const Dataset d(s, 2, 2);
  const auto identity = [](std::span<const double> x, std::size_t) {
    return std::vector<double>(x.begin(), x.end());
  };

  SUBCASE("identity copy of one sample") {
    const std::vector<std::size_t> sel{3};
    const auto a = augment_with_groups(d, identity, 1, sel);
    const auto g = build_group_index(a);
    CHECK(a.size() == 6);
    CHECK(g.c() == 1);
    const auto& grp = g.groups[g.group_of[3]];
    REQUIRE(grp.size() == 2);
    CHECK(a[grp[0]].features == a[grp[1]].features);
    CHECK(a[grp[0]].label == a[grp[1]].label);
  }
  SUBCASE("three samples with two copies each") {
    const std::vector<std::size_t> sel{0, 1, 4};
    const auto before = build_group_index(d).c();
    const auto a = augment_with_groups(d, identity, 2, sel);
    CHECK(build_group_index(a).c() == before + 6);
  }
  SUBCASE("rotation by pi") {
    const std::vector<double> one{1.0, 0.0};
    const Dataset e({{one, 1, std::nullopt}}, 2, 2);
    const auto rot = [](std::span<const double> x, std::size_t) {
      return std::vector<double>{-x[0], -x[1]};
    };
    const std::vector<std::size_t> sel{0};
    const auto a = augment_with_groups(e, rot, 1, sel);
    CHECK(a[1].features == std::vector<double>{-1.0, -0.0});
    CHECK(build_group_index(a).m() == 1);
  }
  SUBCASE("selection out of range") {
    const std::vector<std::size_t> sel{5};
    CHECK_THROWS_AS(augment_with_groups(d, identity, 1, sel), DataError);
  }
}

TEST_CASE("csv rows") {
  const auto d = parse_csv("id,y,x0,x1\na,1,0.5,-0.25\n,0,1.0,2.0\n");
  REQUIRE(d.size() == 2);
  CHECK(d[0].id == std::optional<std::string>("a"));
  CHECK(d[0].label == 1);
  CHECK(d[0].features == std::vector<double>{0.5, -0.25});
  CHECK_FALSE(d[1].id.has_value());
  CHECK(d[1].features == std::vector<double>{1.0, 2.0});
  CHECK(d.num_classes() == 2);
  CHECK(parse_csv("id,y,x0\r\n,2,1\r\n").num_classes() == 3);
}

TEST_CASE("csv errors") {
  CHECK_THROWS_AS(parse_csv(""), DataError);
  CHECK_THROWS_AS(parse_csv("a,1,0.5\n"), DataError);
  CHECK_THROWS_AS(parse_csv("id,y,x0,x1\na,1,0.5\n"), DataError);
  CHECK_THROWS_AS(parse_csv("id,y,x0\na,1,zz\n"), DataError);
  CHECK_THROWS_AS(parse_csv("id,y,x0\na,-1,0\n"), DataError);
  CHECK_THROWS_AS(parse_csv("id,y,x0\na,3,0\n", 2), DataError);
  CHECK_THROWS_AS(load_csv("/nonexistent/file.csv"), DataError);
}

TEST_CASE("csv round trip is bitwise") {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> exponent(-300, 300);
  std::vector<Sample> s;
  for (std::size_t i = 0; i < 100; ++i) {
    Sample x;
    for (int k = 0; k < 5; ++k) x.features.push_back(std::ldexp(normal(rng), exponent(rng) / 10));
    x.label = i % 3;
    if (i % 4 != 0) x.id = "id" + std::to_string(i % 17);
    s.push_back(x);
  }
  s[0].features[0] = 5e-324;
  s[1].features[1] = -0.0;
  const Dataset d(s, 5, 3);
  const Dataset back = parse_csv(format_csv(d), 3);
  CHECK(back == d);
  CHECK(std::signbit(back[1].features[1]));
}

TEST_CASE("ids that cannot be written are rejected") {
  const Dataset d({{{1.0}, 0, std::string("a,b")}}, 1, 2);
  CHECK_THROWS_AS(format_csv(d), DataError);
}

TEST_CASE("format_double") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}
