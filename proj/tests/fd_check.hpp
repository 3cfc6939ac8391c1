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

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

namespace corereg::testing {

// Central differences with step h.
inline std::vector<double> central_difference(const std::function<double(std::span<const double>)>& f,
                                              std::span<const double> x, double h = 1e-5) {
  std::vector<double> at(x.begin(), x.end());
  std::vector<double> g(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) {
    const double keep = at[k];
    at[k] = keep + h;
    const double up = f(at);
    at[k] = keep - h;
    const double down = f(at);
    at[k] = keep;
    g[k] = (up - down) / (2.0 * h);
  }
  return g;
}

// max_k |a_k - b_k| / max(1, max_k |b_k|).
inline double relative_error(std::span<const double> a, std::span<const double> b) {
  double diff = 0.0;
  double scale = 1.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    diff = std::max(diff, std::abs(a[k] - b[k]));
    scale = std::max(scale, std::abs(b[k]));
  }
  return diff / scale;
}

}  // namespace corereg::testing
