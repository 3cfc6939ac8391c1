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

#include "core_reg/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <utility>

#include "core_reg/error.hpp"

namespace corereg {

Dataset::Dataset(std::vector<Sample> samples, std::size_t dim, std::size_t num_classes)
    : samples_(std::move(samples)), dim_(dim), num_classes_(num_classes) {
  if (samples_.empty()) throw DataError("dataset must contain at least one sample");
  if (dim_ == 0) throw DataError("feature dimension must be positive");
  if (num_classes_ < 2) throw DataError("need at least two classes");
  for (std::size_t i = 0; i < samples_.size(); ++i) {
    const Sample& s = samples_[i];
    if (s.features.size() != dim_)
      throw DataError("sample " + std::to_string(i) + " has " +
                      std::to_string(s.features.size()) + " features, expected " +
                      std::to_string(dim_));
    if (s.label >= num_classes_)
      throw DataError("sample " + std::to_string(i) + " has label " +
                      std::to_string(s.label) + " >= K=" + std::to_string(num_classes_));
  }
}

std::size_t GroupIndex::max_group_size() const noexcept {
  std::size_t best = 0;
  for (const auto& g : groups) best = std::max(best, g.size());
  return best;
}

std::size_t GroupIndex::non_singleton_count() const noexcept {
  return static_cast<std::size_t>(
      std::count_if(groups.begin(), groups.end(), [](const auto& g) { return g.size() > 1; }));
}

GroupIndex build_group_index(const Dataset& data) {
  GroupIndex gi;
  gi.group_of.resize(data.size());
  std::map<std::pair<std::size_t, std::string>, std::size_t> seen;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Sample& s = data[i];
    if (!s.id) {
      gi.group_of[i] = gi.groups.size();
      gi.groups.push_back({i});
      continue;
    }
    auto [it, inserted] = seen.try_emplace({s.label, *s.id}, gi.groups.size());
    if (inserted) gi.groups.emplace_back();
    gi.group_of[i] = it->second;
    gi.groups[it->second].push_back(i);
  }
  return gi;
}

GroupIndex group_index_from_groups(std::vector<std::vector<std::size_t>> groups,
                                   std::size_t n) {
  GroupIndex gi;
  gi.group_of.assign(n, n);
  for (std::size_t j = 0; j < groups.size(); ++j) {
    if (groups[j].empty()) throw DataError("empty group in partition");
    for (std::size_t i : groups[j]) {
      if (i >= n) throw DataError("group index out of range");
      if (gi.group_of[i] != n) throw DataError("groups overlap");
      gi.group_of[i] = j;
    }
  }
  if (std::find(gi.group_of.begin(), gi.group_of.end(), n) != gi.group_of.end())
    throw DataError("groups do not cover every sample");
  gi.groups = std::move(groups);
  return gi;
}

Dataset augment_with_groups(const Dataset& data, const FeatureTransform& transform,
                            std::size_t count_per_sample,
                            std::span<const std::size_t> selection) {
  std::vector<Sample> out = data.samples();
  for (std::size_t idx : selection) {
    if (idx >= data.size())
      throw DataError("augmentation selection index " + std::to_string(idx) +
                      " out of range");
    const std::string id = "aug-" + std::to_string(idx);
    out[idx].id = id;
    for (std::size_t k = 0; k < count_per_sample; ++k) {
      Sample copy{transform(data[idx].features, k), data[idx].label, id};
      if (copy.features.size() != data.dim())
        throw DataError("augmentation transform changed the feature dimension");
      out.push_back(std::move(copy));
    }
  }
  return Dataset(std::move(out), data.dim(), data.num_classes());
}

std::string format_double(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string_view::npos) {
      fields.push_back(line.substr(start));
      return fields;
    }
    fields.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
}

double parse_number(std::string_view s, std::size_t line_no) {
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DataError("line " + std::to_string(line_no) + ": non-numeric field '" +
                    std::string(s) + "'");
  return v;
}

std::size_t parse_label(std::string_view s, std::size_t line_no) {
  std::size_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw DataError("line " + std::to_string(line_no) + ": invalid label '" +
                    std::string(s) + "'");
  return v;
}

}  // namespace

Dataset parse_csv(const std::string& text, std::optional<std::size_t> num_classes) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw DataError("missing CSV header");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = split_fields(line);
  if (header.size() < 3 || header[0] != "id" || header[1] != "y")
    throw DataError("CSV header must be id,y,x0,...");
  const std::size_t dim = header.size() - 2;
  for (std::size_t k = 0; k < dim; ++k)
    if (header[k + 2] != "x" + std::to_string(k))
      throw DataError("CSV header column " + std::to_string(k + 2) + " must be x" +
                      std::to_string(k));

  std::vector<Sample> samples;
  std::size_t line_no = 1;
  std::size_t max_label = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != dim + 2)
      throw DataError("line " + std::to_string(line_no) + ": expected " +
                      std::to_string(dim + 2) + " fields, got " +
                      std::to_string(fields.size()));
    Sample s;
    if (!fields[0].empty()) s.id = std::string(fields[0]);
    s.label = parse_label(fields[1], line_no);
    s.features.reserve(dim);
    for (std::size_t k = 0; k < dim; ++k) s.features.push_back(parse_number(fields[k + 2], line_no));
    max_label = std::max(max_label, s.label);
    samples.push_back(std::move(s));
  }
  if (samples.empty()) throw DataError("CSV contains no samples");
  const std::size_t k = num_classes.value_or(std::max<std::size_t>(2, max_label + 1));
  return Dataset(std::move(samples), dim, k);
}

Dataset load_csv(const std::filesystem::path& path, std::optional<std::size_t> num_classes) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str(), num_classes);
}

std::string format_csv(const Dataset& data) {
  std::string out = "id,y";
  for (std::size_t k = 0; k < data.dim(); ++k) out += ",x" + std::to_string(k);
  out += '\n';
  for (const Sample& s : data.samples()) {
    if (s.id) {
      if (s.id->empty() || s.id->find_first_of(",\"\r\n") != std::string::npos)
        throw DataError("id '" + *s.id + "' is empty or contains a CSV delimiter");
      out += *s.id;
    }
    out += ',';
    out += std::to_string(s.label);
    for (double v : s.features) {
      out += ',';
      out += format_double(v);
    }
    out += '\n';
  }
  return out;
}

void save_csv(const Dataset& data, const std::filesystem::path& path) {
  const std::string text = format_csv(data);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed for " + path.string());
}

}  // namespace corereg
