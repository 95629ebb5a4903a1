// Copyright 2026 The aesthetic-vae Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "aest/synth/design.hpp"
#include "aest/synth/raters.hpp"
#include "aest/synth/schema.hpp"

namespace aest::inline AEST_PREC {

struct Dataset {
  AttributeSchema schema;
  std::vector<ImageSample> samples;

  std::size_t rated_count() const;
  Dataset subset(Split split) const;
};

struct DatasetOptions {
  std::size_t resolution = 32;
  double inconsistent_fraction = 0.2;
  double alpha_cutoff = 0.75;
  RaterOptions raters;
};

inline constexpr std::uint64_t kDefaultSeed = 1;
inline constexpr int kDefaultRaters = 60;

struct RaterSummary {
  std::size_t kept = 0;
  std::size_t dropped = 0;
  FilterResult filter;  // full records, including the planted ground truth
};

// Rated designs are rendered once per viewpoint (grayscale, shared rating and
// group id); unrated samples are 3-channel with random attributes.
Dataset build_dataset(std::size_t n_rated_designs, std::size_t n_unrated, int n_raters, std::uint64_t seed,
                      const DatasetOptions& options = {}, RaterSummary* summary = nullptr);

struct SplitResult {
  Dataset train, val, test;
};

// Grouped 50/25/25 split. Rated groups are placed before unrated ones and
// dealt in the repeating pattern train, val, train, test, so both the whole
// dataset and its rated part are split within one group of the ratio.
void assign_splits(Dataset& ds, std::uint64_t seed);
SplitResult split_dataset(const Dataset& ds, std::uint64_t seed);

// On-disk format: <dir>/manifest.json plus one AEST tensor file per array.
void write_dataset(const std::filesystem::path& dir, const Dataset& ds);
Dataset read_dataset(const std::filesystem::path& dir);

}  // namespace aest::inline AEST_PREC
