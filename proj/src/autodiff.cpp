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

#include "core_reg/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace corereg {

Tape::Tape() { edge_begin_.push_back(0); }

void Tape::clear() {
  values_.clear();
  edges_.clear();
  edge_begin_.assign(1, 0);
  adjoints_.clear();
}

Var Tape::variable(double value) {
  begin_node();
  return end_node(value);
}

void Tape::begin_node() {
  if (edge_begin_.back() != edges_.size())
    throw std::logic_error("tape: node construction already in progress");
}

void Tape::add_edge(const Var& parent, double partial) {
  if (parent.tape == nullptr) return;
  if (parent.tape != this) throw std::logic_error("tape: operands recorded on different tapes");
  edges_.push_back({parent.index, partial});
}

Var Tape::end_node(double value) {
  if (values_.size() >= std::numeric_limits<std::uint32_t>::max())
    throw std::length_error("tape: too many nodes");
  Var v;
  v.tape = this;
  v.index = static_cast<std::uint32_t>(values_.size());
  v.value = value;
  values_.push_back(value);
  edge_begin_.push_back(static_cast<std::uint32_t>(edges_.size()));
  return v;
}

void Tape::backward(const Var& output) {
  adjoints_.assign(values_.size(), 0.0);
  if (output.tape == nullptr) return;
  if (output.tape != this) throw std::logic_error("tape: output recorded on another tape");
  adjoints_[output.index] = 1.0;
  for (std::size_t k = output.index + 1; k-- > 0;) {
    const double a = adjoints_[k];
    if (a == 0.0) continue;
    for (std::uint32_t e = edge_begin_[k]; e < edge_begin_[k + 1]; ++e)
      adjoints_[edges_[e].parent] += a * edges_[e].partial;
  }
}

double Tape::adjoint(const Var& v) const {
  if (v.tape == nullptr) return 0.0;
  if (v.tape != this) throw std::logic_error("tape: variable recorded on another tape");
  return v.index < adjoints_.size() ? adjoints_[v.index] : 0.0;
}

namespace {

Tape* common_tape(const Var& a, const Var& b) {
  if (a.tape && b.tape && a.tape != b.tape)
    throw std::logic_error("tape: operands recorded on different tapes");
  return a.tape ? a.tape : b.tape;
}

Tape* common_tape(std::span<const Var> xs) {
  Tape* t = nullptr;
  for (const Var& x : xs) {
    if (x.tape == nullptr) continue;
    if (t && t != x.tape) throw std::logic_error("tape: operands recorded on different tapes");
    t = x.tape;
  }
  return t;
}

Var unary(const Var& a, double value, double partial) {
  if (a.tape == nullptr) return Var(value);
  a.tape->begin_node();
  a.tape->add_edge(a, partial);
  return a.tape->end_node(value);
}

Var binary(const Var& a, const Var& b, double value, double da, double db) {
  Tape* t = common_tape(a, b);
  if (t == nullptr) return Var(value);
  t->begin_node();
  t->add_edge(a, da);
  t->add_edge(b, db);
  return t->end_node(value);
}

double stable_softplus(double x) {
  return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x)));
}

double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var operator+(const Var& a, const Var& b) { return binary(a, b, a.value + b.value, 1.0, 1.0); }
Var operator-(const Var& a, const Var& b) { return binary(a, b, a.value - b.value, 1.0, -1.0); }
Var operator*(const Var& a, const Var& b) {
  return binary(a, b, a.value * b.value, b.value, a.value);
}
Var operator/(const Var& a, const Var& b) {
  const double q = a.value / b.value;
  return binary(a, b, q, 1.0 / b.value, -q / b.value);
}
Var operator-(const Var& a) { return unary(a, -a.value, -1.0); }
Var& operator+=(Var& a, const Var& b) { return a = a + b; }

Var exp(const Var& a) {
  const double e = std::exp(a.value);
  return unary(a, e, e);
}
Var log(const Var& a) { return unary(a, std::log(a.value), 1.0 / a.value); }
Var log1p(const Var& a) { return unary(a, std::log1p(a.value), 1.0 / (1.0 + a.value)); }
Var tanh(const Var& a) {
  const double t = std::tanh(a.value);
  return unary(a, t, 1.0 - t * t);
}
Var relu(const Var& a) {
  return a.value > 0.0 ? unary(a, a.value, 1.0) : unary(a, 0.0, 0.0);
}
Var sqrt(const Var& a) {
  const double s = std::sqrt(a.value);
  return unary(a, s, s > 0.0 ? 0.5 / s : 0.0);
}
Var square(const Var& a) { return unary(a, a.value * a.value, 2.0 * a.value); }
Var softplus(const Var& a) { return unary(a, stable_softplus(a.value), sigmoid(a.value)); }

Var sum(std::span<const Var> xs) {
  double s = 0.0;
  for (const Var& x : xs) s += x.value;
  Tape* t = common_tape(xs);
  if (t == nullptr) return Var(s);
  t->begin_node();
  for (const Var& x : xs) t->add_edge(x, 1.0);
  return t->end_node(s);
}

Var mean(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("mean of empty span");
  const double inv = 1.0 / static_cast<double>(xs.size());
  double s = 0.0;
  for (const Var& x : xs) s += x.value;
  Tape* t = common_tape(xs);
  if (t == nullptr) return Var(s * inv);
  t->begin_node();
  for (const Var& x : xs) t->add_edge(x, inv);
  return t->end_node(s * inv);
}

Var sum_of_squares(std::span<const Var> xs) {
  double s = 0.0;
  for (const Var& x : xs) s += x.value * x.value;
  Tape* t = common_tape(xs);
  if (t == nullptr) return Var(s);
  t->begin_node();
  for (const Var& x : xs) t->add_edge(x, 2.0 * x.value);
  return t->end_node(s);
}

Var affine(std::span<const Var> w, std::span<const Var> x, const Var& b) {
  if (w.size() != x.size()) throw std::invalid_argument("affine: size mismatch");
  double s = b.value;
  for (std::size_t k = 0; k < w.size(); ++k) s += w[k].value * x[k].value;
  Tape* t = b.tape;
  for (Tape* other : {common_tape(w), common_tape(x)}) {
    if (other && t && other != t)
      throw std::logic_error("tape: operands recorded on different tapes");
    if (other) t = other;
  }
  if (t == nullptr) return Var(s);
  t->begin_node();
  for (std::size_t k = 0; k < w.size(); ++k) {
    t->add_edge(w[k], x[k].value);
    t->add_edge(x[k], w[k].value);
  }
  t->add_edge(b, 1.0);
  return t->end_node(s);
}

Var affine(std::span<const Var> w, std::span<const double> x, const Var& b) {
  if (w.size() != x.size()) throw std::invalid_argument("affine: size mismatch");
  double s = b.value;
  for (std::size_t k = 0; k < w.size(); ++k) s += w[k].value * x[k];
  Tape* t = b.tape ? b.tape : common_tape(w);
  if (t == nullptr) return Var(s);
  t->begin_node();
  for (std::size_t k = 0; k < w.size(); ++k) t->add_edge(w[k], x[k]);
  t->add_edge(b, 1.0);
  return t->end_node(s);
}

Var population_variance(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("variance of empty span");
  const double inv = 1.0 / static_cast<double>(xs.size());
  double mu = 0.0;
  for (const Var& x : xs) mu += x.value;
  mu *= inv;
  double v = 0.0;
  for (const Var& x : xs) v += (x.value - mu) * (x.value - mu);
  v *= inv;
  // d/dx_i of (1/k) sum (x - mu)^2 is 2 (x_i - mu) / k; the mean term cancels.
  Tape* t = common_tape(xs);
  if (t == nullptr) return Var(v);
  t->begin_node();
  for (const Var& x : xs) t->add_edge(x, 2.0 * (x.value - mu) * inv);
  return t->end_node(v);
}

Var log_sum_exp(std::span<const Var> xs) {
  if (xs.empty()) throw std::invalid_argument("log_sum_exp of empty span");
  double mx = -std::numeric_limits<double>::infinity();
  for (const Var& x : xs) mx = std::max(mx, x.value);
  double s = 0.0;
  for (const Var& x : xs) s += std::exp(x.value - mx);
  const double value = mx + std::log(s);
  Tape* t = common_tape(xs);
  if (t == nullptr) return Var(value);
  t->begin_node();
  for (const Var& x : xs) t->add_edge(x, std::exp(x.value - value));
  return t->end_node(value);
}

std::vector<Var> constants(std::span<const double> values) {
  return std::vector<Var>(values.begin(), values.end());
}

std::pair<double, std::vector<double>> value_and_gradient(
    const std::function<Var(std::span<const Var>)>& objective,
    std::span<const double> theta) {
  thread_local Tape tape;
  tape.clear();
  std::vector<Var> vars;
  vars.reserve(theta.size());
  for (double v : theta) vars.push_back(tape.variable(v));
  const Var out = objective(vars);
  tape.backward(out);
  std::vector<double> grad(theta.size());
  for (std::size_t k = 0; k < theta.size(); ++k) grad[k] = tape.adjoint(vars[k]);
  const double value = out.value;
  tape.clear();
  return {value, std::move(grad)};
}

}  // namespace corereg
