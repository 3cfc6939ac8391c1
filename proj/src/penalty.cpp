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

#include "core_reg/penalty.hpp"

#include <cmath>
#include <map>

#include "core_reg/error.hpp"

namespace corereg {

void PenaltyConfig::validate() const {
  if (exponent != 0.5 && exponent != 1.0) throw ConfigError("penalty exponent must be 0.5 or 1");
  if (!std::isfinite(weight) || weight < 0.0)
    throw ConfigError("penalty weight must be finite and >= 0");
  if (!std::isfinite(ridge) || ridge < 0.0)
    throw ConfigError("ridge weight must be finite and >= 0");
}

namespace {

void check_nu(double nu) {
  if (nu != 0.5 && nu != 1.0) throw ConfigError("penalty exponent must be 0.5 or 1");
}

void check_length(std::size_t values, const GroupIndex& groups) {
  if (values != groups.n())
    throw DataError("got " + std::to_string(values) + " values for " +
                    std::to_string(groups.n()) + " grouped samples");
}

struct GroupStats {
  double mean;
  double variance;
};

GroupStats group_stats(std::span<const double> values, const std::vector<std::size_t>& group) {
  const double k = static_cast<double>(group.size());
  double mu = 0.0;
  for (std::size_t i : group) mu += values[i];
  mu /= k;
  double v = 0.0;
  for (std::size_t i : group) v += (values[i] - mu) * (values[i] - mu);
  return {mu, v / k};
}

}  // namespace

double conditional_penalty(std::span<const double> values, const GroupIndex& groups, double nu) {
  check_nu(nu);
  check_length(values.size(), groups);
  if (groups.m() == 0) return 0.0;
  double total = 0.0;
  for (const auto& g : groups.groups) {
    if (g.size() < 2) continue;
    const double v = group_stats(values, g).variance;
    total += nu == 1.0 ? v : std::sqrt(v);
  }
  return total / static_cast<double>(groups.m());
}

Var conditional_penalty(std::span<const Var> values, const GroupIndex& groups, double nu) {
  check_nu(nu);
  check_length(values.size(), groups);
  std::vector<Var> terms;
  std::vector<Var> members;
  for (const auto& g : groups.groups) {
    if (g.size() < 2) continue;
    members.clear();
    for (std::size_t i : g) members.push_back(values[i]);
    Var v = population_variance(members);
    terms.push_back(nu == 1.0 ? v : sqrt(v));
  }
  if (terms.empty()) return Var(0.0);
  return sum(terms) / Var(static_cast<double>(groups.m()));
}

double prediction_penalty(const std::vector<std::vector<double>>& logits,
                          const GroupIndex& groups, double nu) {
  check_length(logits.size(), groups);
  if (logits.empty()) return 0.0;
  const std::size_t k = logits.front().size();
  double total = 0.0;
  std::vector<double> column(logits.size());
  for (std::size_t r = 0; r < k; ++r) {
    for (std::size_t i = 0; i < logits.size(); ++i) column[i] = logits[i][r];
    total += conditional_penalty(column, groups, nu);
  }
  return total;
}

double variance_ratio(std::span<const double> values, const GroupIndex& groups) {
  check_length(values.size(), groups);
  if (groups.m() < 2) throw DataError("variance ratio needs at least two groups");
  if (groups.non_singleton_count() == 0)
    throw DataError("variance ratio needs at least one group with two or more samples");
  std::vector<double> means;
  means.reserve(groups.m());
  for (const auto& g : groups.groups) means.push_back(group_stats(values, g).mean);
  const double between = baseline_unconditional(means);
  if (!(between > 0.0))
    throw DegenerateVarianceError("variance ratio undefined: all group means are equal");
  return conditional_penalty(values, groups, 1.0) / between;
}

VarianceDecomposition variance_decomposition(std::span<const double> values,
                                             const GroupIndex& groups) {
  check_length(values.size(), groups);
  if (values.empty()) throw DataError("variance decomposition needs at least one value");
  const double n = static_cast<double>(values.size());
  double mu = 0.0;
  for (double v : values) mu += v;
  mu /= n;
  VarianceDecomposition out;
  for (double v : values) out.total += (v - mu) * (v - mu);
  out.total /= n;
  for (const auto& g : groups.groups) {
    const GroupStats s = group_stats(values, g);
    const double w = static_cast<double>(g.size()) / n;
    out.within += w * s.variance;
    out.between += w * (s.mean - mu) * (s.mean - mu);
  }
  return out;
}

GroupIndex baseline_group_by_label(const Dataset& data) {
  std::map<std::size_t, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < data.size(); ++i) by_label[data[i].label].push_back(i);
  std::vector<std::vector<std::size_t>> groups;
  for (auto& [label, members] : by_label) groups.push_back(std::move(members));
  return group_index_from_groups(std::move(groups), data.size());
}

double baseline_unconditional(std::span<const double> values) {
  if (values.empty()) throw DataError("variance of an empty vector");
  const double n = static_cast<double>(values.size());
  double mu = 0.0;
  for (double v : values) mu += v;
  mu /= n;
  double s = 0.0;
  for (double v : values) s += (v - mu) * (v - mu);
  return s / n;
}

}  // namespace corereg
