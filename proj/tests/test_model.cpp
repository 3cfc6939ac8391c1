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
#include <filesystem>
#include <random>
#include <vector>

#include "core_reg/error.hpp"
#include "core_reg/model.hpp"
#include "fd_check.hpp"
#include "json.hpp"

using namespace corereg;
using corereg::testing::central_difference;
using corereg::testing::relative_error;

namespace {

// High-precision reference values.
constexpr double kLn2 = 0.6931471805599453094;
constexpr double kLn3 = 1.0986122886681096914;
constexpr double kLog1pE = 1.3132616875182228340;     // log(1 + e)
constexpr double kLog1pEm20 = 2.0611536203143807e-9;  // log(1 + e^-20)

}  // namespace

TEST_CASE("spec shapes") {
  const auto lin = ModelSpec::linear(3);
  CHECK(lin.param_count() == 4);
  const auto net = ModelSpec::mlp({2, 16, 16, 1});
  CHECK(net.param_count() == 2 * 16 + 16 + 16 * 16 + 16 + 16 + 1);
  CHECK(net.layer_offset(1) == 48);
  CHECK_THROWS_AS(ModelSpec::mlp({2}).validate(), ConfigError);
  CHECK_THROWS_AS(ModelSpec::mlp({2, 0, 1}).validate(), ConfigError);
  ModelSpec bad = ModelSpec::linear(2);
  bad.layer_sizes = {2, 3, 1};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("flatten round trip and weight mask") {
  const auto spec = ModelSpec::mlp({3, 4, 2});
  const auto theta = init_params(spec, 11);
  CHECK(flatten(spec, unflatten(spec, theta)) == theta);
  const auto mask = weight_mask(spec);
  std::size_t weights = 0;
  for (bool b : mask) weights += b ? 1 : 0;
  CHECK(weights == 3 * 4 + 4 * 2);
  const auto layers = unflatten(spec, theta);
  for (const auto& l : layers)
    for (double b : l.bias) CHECK(b == 0.0);
  CHECK(init_params(spec, 11) == theta);
  CHECK(init_params(spec, 12) != theta);
}

TEST_CASE("forward examples") {
  const auto lin = ModelSpec::linear(2);
  const std::vector<double> theta{1.0, -0.75, 0.0};
  const std::vector<double> x{1.0, 1.0};
  CHECK(forward(lin, theta, x)[0] == doctest::Approx(0.25));
  const std::vector<double> zero3(3, 0.0);
  CHECK(forward(lin, zero3, x)[0] == 0.0);
  CHECK(logistic_loss(1.0, 0.0) == doctest::Approx(kLn2));
  const auto net = ModelSpec::mlp({2, 3, 1});
  const std::vector<double> zero(net.param_count(), 0.0);
  CHECK(forward(net, zero, x)[0] == 0.0);
}

TEST_CASE("logistic loss") {
  CHECK(logistic_loss(1.0, 0.0) == doctest::Approx(kLn2).epsilon(1e-15));
  CHECK(logistic_loss(1.0, 50.0) <= 1e-20);
  CHECK(logistic_loss(1.0, 50.0) >= 0.0);
  CHECK(logistic_loss(-1.0, 1.0) == doctest::Approx(kLog1pE).epsilon(1e-15));
  CHECK(std::isfinite(logistic_loss(-1.0, 1e6)));
  CHECK(logistic_loss(-1.0, 1e6) == doctest::Approx(1e6));
}

TEST_CASE("softmax cross-entropy") {
  const std::vector<double> flat{0.3, 0.3};
  CHECK(softmax_cross_entropy(0, flat) == doctest::Approx(kLn2).epsilon(1e-15));
  const std::vector<double> sep{10.0, -10.0};
  CHECK(softmax_cross_entropy(0, sep) == doctest::Approx(kLog1pEm20).epsilon(1e-12));
  const std::vector<double> zero3(3, 0.0);
  CHECK(softmax_cross_entropy(2, zero3) == doctest::Approx(kLn3).epsilon(1e-15));
  const std::vector<double> huge{1000.0, -1000.0};
  CHECK(std::isfinite(softmax_cross_entropy(1, huge)));
}

TEST_CASE("logistic gradient at zero") {
  const auto lin = ModelSpec::linear(2);
  const std::vector<double> x{1.0, 2.0};
  const std::vector<double> theta(3, 0.0);
  const auto [value, grad] = value_and_gradient(
      [&](std::span<const Var> th) { return logistic_loss(1.0, forward(lin, th, x)[0]); }, theta);
  CHECK(value == doctest::Approx(kLn2));
  CHECK(grad[0] == doctest::Approx(-0.5));
  CHECK(grad[1] == doctest::Approx(-1.0));
  CHECK(grad[2] == doctest::Approx(-0.5));
}

TEST_CASE("squared norm gradient") {
  const std::vector<double> theta{0.5, -2.0, 3.0};
  const auto [value, grad] =
      value_and_gradient([](std::span<const Var> th) { return sum_of_squares(th); }, theta);
  CHECK(value == doctest::Approx(13.25));
  for (std::size_t k = 0; k < theta.size(); ++k) CHECK(grad[k] == doctest::Approx(2.0 * theta[k]));
}

TEST_CASE("random mlp objectives match finite differences") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> normal;
  for (Activation act : {Activation::tanh, Activation::relu}) {
    for (std::size_t width : {std::size_t{1}, std::size_t{3}}) {
      const auto spec = ModelSpec::mlp({4, 6, 5, width}, act);
      for (int rep = 0; rep < 5; ++rep) {
        // Nonzero biases keep relu units away from their kink.
        auto theta = init_params(spec, 100 + rep);
        for (double& v : theta) v += 0.1 * normal(rng);
        std::vector<std::vector<double>> xs(6, std::vector<double>(4));
        for (auto& x : xs)
          for (double& v : x) v = normal(rng);
        const auto objective = [&](std::span<const Var> th) {
          Var total = 0.0;
          for (std::size_t i = 0; i < xs.size(); ++i) total += sample_loss(i % 2, forward(spec, th, xs[i]));
          return total;
        };
        const auto f = [&](std::span<const double> th) { return value_and_gradient(objective, th).first; };
        const auto grad = value_and_gradient(objective, theta).second;
        CHECK(relative_error(grad, central_difference(f, theta)) <= 1e-5);
      }
    }
  }
}

TEST_CASE("input gradient") {
  const auto spec = ModelSpec::mlp({3, 4, 1});
  const auto theta = init_params(spec, 2);
  const std::vector<double> x{0.3, -1.0, 0.7};
  const auto [loss, grad] = loss_input_gradient(spec, theta, x, 1);
  CHECK(loss == doctest::Approx(sample_loss(1, forward(spec, theta, x))));
  const auto f = [&](std::span<const double> at) { return sample_loss(1, forward(spec, theta, at)); };
  CHECK(relative_error(grad, central_difference(f, x)) <= 1e-7);
}

TEST_CASE("evaluation helpers") {
  std::vector<Sample> s;
  for (int i = 0; i < 10; ++i) s.push_back({{i < 5 ? -1.0 : 1.0}, static_cast<std::size_t>(i < 5 ? 0 : 1), {}});
  const Dataset d(s, 1, 2);
  const auto spec = ModelSpec::linear(1);
  const std::vector<double> perfect{5.0, 0.0};
  CHECK(error_rate(spec, perfect, d) == 0.0);
  const std::vector<double> constant{0.0, 1.0};
  CHECK(error_rate(spec, constant, d) == 0.5);
  CHECK(mean_loss(spec, std::vector<double>{0.0, 0.0}, d) == doctest::Approx(kLn2));
  CHECK_THROWS_AS(check_compatible(ModelSpec::linear(2), d), DataError);
  CHECK_THROWS_AS(check_compatible(ModelSpec::linear(1), Dataset(s, 1, 3)), DataError);
  CHECK_NOTHROW(check_compatible(ModelSpec::linear(1, 3), d));
}

TEST_CASE("checkpoint round trip") {
  const Checkpoint ck{ModelSpec::mlp({2, 5, 1}, Activation::relu), init_params(ModelSpec::mlp({2, 5, 1}), 4), 9,
                      123};
  const auto path = std::filesystem::temp_directory_path() / "core_reg_ckpt_test.json";
  save_checkpoint(ck, path);
  const auto back = load_checkpoint(path);
  CHECK(back.spec == ck.spec);
  CHECK(back.params == ck.params);
  CHECK(back.seed == 9);
  CHECK(back.step == 123);
  std::filesystem::remove(path);
  nlohmann::json j = to_json(ck);
  j["flat_params"].push_back(1.0);
  CHECK_THROWS_AS(checkpoint_from_json(j), DataError);
}
