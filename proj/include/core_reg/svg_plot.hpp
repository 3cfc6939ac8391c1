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
#include <string>
#include <vector>

#include "core_reg/dataset.hpp"
#include "core_reg/model.hpp"

namespace corereg {

struct PlotCurve {
  ModelSpec spec;
  std::vector<double> theta;
  std::string label;
};

struct PlotOptions {
  std::size_t max_points = 2000;  // deterministic subsample of the scatter
  std::size_t max_pairs = 10;     // grouped observations joined by segments
  std::size_t grid = 400;         // contour grid resolution per axis
  std::uint64_t seed = 0;
  int width = 640;
  int height = 640;
};

// Scatter of 2-D data coloured by class with the zero-logit contour of each
// model traced by marching squares. For multi-logit models the contour of
// logit_1 - logit_0 is drawn. Throws DataError unless the data is 2-D.
std::string render_svg(const Dataset& data, const GroupIndex& groups,
                       const std::vector<PlotCurve>& curves, const PlotOptions& options = {});

}  // namespace corereg
