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

#include "core_reg/svg_plot.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <limits>
#include <random>

#include "core_reg/error.hpp"

namespace corereg {

namespace {

constexpr std::array<const char*, 6> kClassColors = {"#1f3fbf", "#d62728", "#2ca02c",
                                                     "#9467bd", "#8c564b", "#e377c2"};
constexpr std::array<const char*, 5> kDashes = {"", "8,4", "2,3", "10,3,2,3", "4,4"};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

struct Frame {
  double x0, x1, y0, y1;
  int width, height;
  double px(double x) const { return (x - x0) / (x1 - x0) * width; }
  double py(double y) const { return height - (y - y0) / (y1 - y0) * height; }
};

double boundary_value(const PlotCurve& c, double x, double y) {
  const double in[2] = {x, y};
  const auto z = forward(c.spec, c.theta, in);
  return z.size() == 1 ? z[0] : z[1] - z[0];
}

// Zero contour of one model as a list of segments in data coordinates.
std::string contour_path(const PlotCurve& c, const Frame& f, std::size_t n) {
  std::vector<double> v((n + 1) * (n + 1));
  auto gx = [&](std::size_t i) { return f.x0 + (f.x1 - f.x0) * static_cast<double>(i) / n; };
  auto gy = [&](std::size_t k) { return f.y0 + (f.y1 - f.y0) * static_cast<double>(k) / n; };
  for (std::size_t k = 0; k <= n; ++k)
    for (std::size_t i = 0; i <= n; ++i) v[k * (n + 1) + i] = boundary_value(c, gx(i), gy(k));

  std::string path;
  auto at = [&](std::size_t i, std::size_t k) { return v[k * (n + 1) + i]; };
  auto cross = [](double a, double b) { return a / (a - b); };
  for (std::size_t k = 0; k < n; ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      // Corners counter-clockwise from bottom-left.
      const double a = at(i, k), b = at(i + 1, k), cc = at(i + 1, k + 1), d = at(i, k + 1);
      std::vector<std::pair<double, double>> pts;
      const double x0 = gx(i), x1 = gx(i + 1), y0 = gy(k), y1 = gy(k + 1);
      if ((a > 0) != (b > 0)) pts.emplace_back(x0 + cross(a, b) * (x1 - x0), y0);
      if ((b > 0) != (cc > 0)) pts.emplace_back(x1, y0 + cross(b, cc) * (y1 - y0));
      if ((cc > 0) != (d > 0)) pts.emplace_back(x1 - cross(cc, d) * (x1 - x0), y1);
      if ((d > 0) != (a > 0)) pts.emplace_back(x0, y1 - cross(d, a) * (y1 - y0));
      for (std::size_t s = 0; s + 1 < pts.size(); s += 2)
        path += "M" + fmt(f.px(pts[s].first)) + " " + fmt(f.py(pts[s].second)) + "L" +
                fmt(f.px(pts[s + 1].first)) + " " + fmt(f.py(pts[s + 1].second));
    }
  }
  return path;
}

}  // namespace

std::string render_svg(const Dataset& data, const GroupIndex& groups,
                       const std::vector<PlotCurve>& curves, const PlotOptions& options) {
  if (data.dim() != 2)
    throw DataError("plotting needs 2-D features, got dimension " + std::to_string(data.dim()));
  if (groups.n() != data.size()) throw DataError("grouping does not match the dataset");
  for (const auto& c : curves) {
    if (c.spec.input_dim() != 2) throw DataError("plotted model must take 2-D input");
    if (c.theta.size() != c.spec.param_count()) throw DataError("plotted model has the wrong parameter count");
  }
  if (options.grid < 2) throw ConfigError("contour grid must be at least 2");

  double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin, ymin = xmin, ymax = -xmin;
  for (const auto& s : data.samples()) {
    xmin = std::min(xmin, s.features[0]);
    xmax = std::max(xmax, s.features[0]);
    ymin = std::min(ymin, s.features[1]);
    ymax = std::max(ymax, s.features[1]);
  }
  const double padx = std::max(1e-6, 0.05 * (xmax - xmin));
  const double pady = std::max(1e-6, 0.05 * (ymax - ymin));
  const Frame f{xmin - padx, xmax + padx, ymin - pady, ymax + pady, options.width, options.height};

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::mt19937_64 rng(options.seed);
  std::shuffle(order.begin(), order.end(), rng);
  order.resize(std::min(order.size(), options.max_points));
  std::sort(order.begin(), order.end());

  std::string svg = "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
                    std::to_string(options.width) + "\" height=\"" +
                    std::to_string(options.height) + "\" viewBox=\"0 0 " +
                    std::to_string(options.width) + " " + std::to_string(options.height) +
                    "\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n<g>\n";
  for (std::size_t i : order) {
    const Sample& s = data[i];
    svg += "<circle cx=\"" + fmt(f.px(s.features[0])) + "\" cy=\"" + fmt(f.py(s.features[1])) +
           "\" r=\"1.6\" fill=\"" + kClassColors[s.label % kClassColors.size()] +
           "\" fill-opacity=\"0.55\"/>\n";
  }
  svg += "</g>\n<g stroke=\"black\" stroke-width=\"1\">\n";
  std::size_t pairs = 0;
  for (const auto& g : groups.groups) {
    if (pairs >= options.max_pairs) break;
    if (g.size() < 2) continue;
    ++pairs;
    std::string pts;
    for (std::size_t i : g)
      pts += fmt(f.px(data[i].features[0])) + "," + fmt(f.py(data[i].features[1])) + " ";
    pts.pop_back();
    svg += "<polyline points=\"" + pts + "\" fill=\"none\"/>\n";
  }
  svg += "</g>\n";
  for (std::size_t k = 0; k < curves.size(); ++k) {
    const char* dash = kDashes[k % kDashes.size()];
    svg += "<path d=\"" + contour_path(curves[k], f, options.grid) +
           "\" fill=\"none\" stroke=\"black\" stroke-width=\"2\"";
    if (*dash) svg += std::string(" stroke-dasharray=\"") + dash + "\"";
    svg += "/>\n";
  }
  if (!curves.empty()) {
    const int h = 20 * static_cast<int>(curves.size()) + 10;
    svg += "<g font-family=\"sans-serif\" font-size=\"12\">\n<rect x=\"8\" y=\"8\" width=\"170\" "
           "height=\"" + std::to_string(h) + "\" fill=\"white\" stroke=\"gray\"/>\n";
    for (std::size_t k = 0; k < curves.size(); ++k) {
      const int y = 26 + 20 * static_cast<int>(k);
      const char* dash = kDashes[k % kDashes.size()];
      svg += "<line x1=\"16\" y1=\"" + std::to_string(y - 4) + "\" x2=\"56\" y2=\"" +
             std::to_string(y - 4) + "\" stroke=\"black\" stroke-width=\"2\"";
      if (*dash) svg += std::string(" stroke-dasharray=\"") + dash + "\"";
      std::string label;
      for (char ch : curves[k].label) {
        if (ch == '<') label += "&lt;";
        else if (ch == '>') label += "&gt;";
        else if (ch == '&') label += "&amp;";
        else label += ch;
      }
      svg += "/>\n<text x=\"64\" y=\"" + std::to_string(y) + "\">" + label + "</text>\n";
    }
    svg += "</g>\n";
  }
  svg += "</svg>\n";
  return svg;
}

}  // namespace corereg
