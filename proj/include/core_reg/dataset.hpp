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
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace corereg {

struct Sample {
  std::vector<double> features;
  std::size_t label = 0;
  std::optional<std::string> id;

  bool operator==(const Sample&) const = default;
};

// A labelled sample set with a fixed feature dimension and class count.
// Immutable once constructed.
class Dataset {
 public:
  Dataset(std::vector<Sample> samples, std::size_t dim, std::size_t num_classes);

  std::size_t size() const noexcept { return samples_.size(); }
  std::size_t dim() const noexcept { return dim_; }
  std::size_t num_classes() const noexcept { return num_classes_; }
  const Sample& operator[](std::size_t i) const { return samples_[i]; }
  const std::vector<Sample>& samples() const noexcept { return samples_; }

  bool operator==(const Dataset&) const = default;

 private:
  std::vector<Sample> samples_;
  std::size_t dim_;
  std::size_t num_classes_;
};

// Partition of sample indices into groups sharing (label, id).
struct GroupIndex {
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::size_t> group_of;  // sample index -> group index

  std::size_t n() const noexcept { return group_of.size(); }
  std::size_t m() const noexcept { return groups.size(); }
  std::size_t c() const noexcept { return n() - m(); }
  std::size_t max_group_size() const noexcept;
  std::size_t non_singleton_count() const noexcept;
};

// Groups in first-occurrence order. Samples without an id are singletons.
GroupIndex build_group_index(const Dataset& data);

// Builds the index from explicit groups; validates that they partition 0..n-1.
GroupIndex group_index_from_groups(std::vector<std::vector<std::size_t>> groups,
                                   std::size_t n);

using FeatureTransform =
    std::function<std::vector<double>(std::span<const double> x, std::size_t copy)>;

// Appends count_per_sample transformed copies of each selected sample. The
// original and its copies are tagged with the id "aug-<original index>".
Dataset augment_with_groups(const Dataset& data, const FeatureTransform& transform,
                            std::size_t count_per_sample,
                            std::span<const std::size_t> selection);

// CSV with header id,y,x0,...,x{p-1}. An empty id field means absent.
// num_classes defaults to max label + 1 (at least 2).
Dataset load_csv(const std::filesystem::path& path,
                 std::optional<std::size_t> num_classes = std::nullopt);
Dataset parse_csv(const std::string& text,
                  std::optional<std::size_t> num_classes = std::nullopt);
void save_csv(const Dataset& data, const std::filesystem::path& path);
std::string format_csv(const Dataset& data);

// Shortest decimal string that parses back to the same double.
std::string format_double(double v);

}  // namespace corereg
