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

// Minimal reverse-mode automatic differentiation over scalars.
//
// A Tape records every operation as a node holding its value and the partial
// derivatives with respect to its parents. Var is a lightweight handle; a Var
// without a tape is a constant and records nothing.

#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace corereg {

class Tape;

struct Var {
  Tape* tape = nullptr;
  std::uint32_t index = 0;
  double value = 0.0;

  Var() = default;
  Var(double v) : value(v) {}  // NOLINT: implicit constants keep formulas readable
  bool is_constant() const noexcept { return tape == nullptr; }
};

class Tape {
 public:
  Tape();

  Var variable(double value);
  std::size_t size() const noexcept { return values_.size(); }
  void clear();

  // Node construction. Constant operands are skipped by add_edge.
  void begin_node();
  void add_edge(const Var& parent, double partial);
  Var end_node(double value);

  // Reverse sweep from output; afterwards adjoint(v) is d output / d v.
  void backward(const Var& output);
  double adjoint(const Var& v) const;

 private:
  struct Edge {
    std::uint32_t parent;
    double partial;
  };
  std::vector<double> values_;
  std::vector<std::uint32_t> edge_begin_;
  std::vector<Edge> edges_;
  std::vector<double> adjoints_;
};

Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator*(const Var& a, const Var& b);
Var operator/(const Var& a, const Var& b);
Var operator-(const Var& a);
Var& operator+=(Var& a, const Var& b);

Var exp(const Var& a);
Var log(const Var& a);
Var log1p(const Var& a);
Var tanh(const Var& a);
Var relu(const Var& a);      // subgradient 0 at 0
Var sqrt(const Var& a);      // derivative taken as 0 at 0
Var square(const Var& a);
Var softplus(const Var& a);  // log(1 + e^a), evaluated stably

Var sum(std::span<const Var> xs);
Var mean(std::span<const Var> xs);
Var sum_of_squares(std::span<const Var> xs);
// b + sum_k w[k] * x[k]
Var affine(std::span<const Var> w, std::span<const Var> x, const Var& b);
Var affine(std::span<const Var> w, std::span<const double> x, const Var& b);
// Divide-by-size variance around the sample mean.
Var population_variance(std::span<const Var> xs);
Var log_sum_exp(std::span<const Var> xs);

std::vector<Var> constants(std::span<const double> values);

// Evaluates objective at theta and returns its value and exact gradient.
// Uses a thread-local tape, so concurrent calls on different threads are safe.
std::pair<double, std::vector<double>> value_and_gradient(
    const std::function<Var(std::span<const Var>)>& objective,
    std::span<const double> theta);

}  // namespace corereg
