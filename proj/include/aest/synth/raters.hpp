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
#include <vector>

#include "aest/config.hpp"

namespace aest::inline AEST_PREC {

struct RepeatPair {
  std::size_t item = 0;
  int first = 0;   // first exposure (also the item's entry in `ratings`)
  int second = 0;  // repeated exposure
};

struct RaterRecord {
  int rater_id = 0;
  std::vector<int> ratings;  // one integer rating in [1, 5] per item
  std::vector<RepeatPair> repeats;
  bool planted_inconsistent = false;  // simulation ground truth
};

struct RaterOptions {
  std::size_t repeat_items = 10;
  double noise_sd = 0.4;
  double repeat_sd = 0.2;
};

// Consistent raters report round(clamp(y* + e)), e ~ N(0, noise_sd), and on
// repeats round(clamp(y* + e')), e' ~ N(e, repeat_sd). Inconsistent raters
// answer uniformly at random on every exposure. Exactly
// round(inconsistent_fraction * n_raters) raters are planted inconsistent.
std::vector<RaterRecord> simulate_raters(const std::vector<double>& true_ratings, int n_raters,
                                         double inconsistent_fraction, std::uint64_t seed,
                                         const RaterOptions& options = {});

// Interval-metric alpha over the record's repeat pairs:
// 1 - D_o / D_e, with D_o the mean squared within-pair difference and D_e
// the mean squared difference over all pairs of pooled repeat values.
double krippendorff_alpha(const RaterRecord& record);

struct FilterResult {
  std::vector<RaterRecord> kept;
  std::vector<RaterRecord> dropped;
};
FilterResult filter_raters(const std::vector<RaterRecord>& records, double cutoff = 0.75);

}  // namespace aest::inline AEST_PREC
