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

#include "aest/synth/raters.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "aest/errors.hpp"
#include "aest/rng.hpp"

namespace aest::inline AEST_PREC {

namespace {

int to_scale(double v) { return static_cast<int>(std::lround(std::clamp(v, 1.0, 5.0))); }

}  // namespace

std::vector<RaterRecord> simulate_raters(const std::vector<double>& true_ratings, int n_raters,
                                         double inconsistent_fraction, std::uint64_t seed,
                                         const RaterOptions& options) {
  require(n_raters > 0, "simulate_raters: n_raters must be positive");
  require(inconsistent_fraction >= 0 && inconsistent_fraction <= 1,
          "simulate_raters: inconsistent_fraction must lie in [0,1]");
  require(!true_ratings.empty(), "simulate_raters: no items");
  const std::size_t n_items = true_ratings.size();
  const std::size_t n_repeat = std::min(options.repeat_items, n_items);

  Rng rng(Rng::mix(seed, 0xA7E5));
  std::vector<std::size_t> order(static_cast<std::size_t>(n_raters));
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
  const auto n_bad = static_cast<std::size_t>(std::lround(inconsistent_fraction * n_raters));
  std::vector<bool> bad(order.size(), false);
  for (std::size_t i = 0; i < n_bad; ++i) bad[order[i]] = true;

  // Every rater sees the same repeated items, evenly spaced over the rating range.
  const auto [lo, hi] = std::minmax_element(true_ratings.begin(), true_ratings.end());
  std::vector<std::size_t> repeat_items;
  std::vector<bool> taken(n_items, false);
  for (std::size_t i = 0; i < n_repeat; ++i) {
    const double target = *lo + (*hi - *lo) * (static_cast<double>(i) + 0.5) / static_cast<double>(n_repeat);
    std::size_t best = n_items;
    for (std::size_t j = 0; j < n_items; ++j) {
      if (taken[j]) continue;
      if (best == n_items || std::abs(true_ratings[j] - target) < std::abs(true_ratings[best] - target)) best = j;
    }
    taken[best] = true;
    repeat_items.push_back(best);
  }

  std::vector<RaterRecord> records;
  records.reserve(order.size());
  for (int r = 0; r < n_raters; ++r) {
    RaterRecord rec;
    rec.rater_id = r;
    rec.planted_inconsistent = bad[static_cast<std::size_t>(r)];
    std::vector<double> noise(n_items, 0.0);
    rec.ratings.resize(n_items);
    for (std::size_t i = 0; i < n_items; ++i) {
      if (rec.planted_inconsistent) {
        rec.ratings[i] = 1 + static_cast<int>(rng.index(5));
      } else {
        noise[i] = options.noise_sd * rng.normal();
        rec.ratings[i] = to_scale(true_ratings[i] + noise[i]);
      }
    }
    for (std::size_t item : repeat_items) {
      const int second = rec.planted_inconsistent
                             ? 1 + static_cast<int>(rng.index(5))
                             : to_scale(true_ratings[item] + noise[item] + options.repeat_sd * rng.normal());
      rec.repeats.push_back({item, rec.ratings[item], second});
    }
    std::sort(rec.repeats.begin(), rec.repeats.end(),
              [](const RepeatPair& a, const RepeatPair& b) { return a.item < b.item; });
    records.push_back(std::move(rec));
  }
  return records;
}

double krippendorff_alpha(const RaterRecord& record) {
  const std::size_t units = record.repeats.size();
  require(units >= 2, "krippendorff_alpha: need at least two repeat items");
  double observed = 0, sum = 0, sum_sq = 0;
  for (const auto& p : record.repeats) {
    const double d = p.first - p.second;
    observed += d * d;
    for (double v : {double(p.first), double(p.second)}) {
      sum += v;
      sum_sq += v * v;
    }
  }
  observed /= static_cast<double>(units);
  // sum_{i<j} (v_i - v_j)^2 = n * sum(v^2) - (sum v)^2
  const double n = 2.0 * static_cast<double>(units);
  const double expected = (n * sum_sq - sum * sum) / (n * (n - 1) / 2);
  if (expected <= 0) return 1.0;
  return 1.0 - observed / expected;
}

FilterResult filter_raters(const std::vector<RaterRecord>& records, double cutoff) {
  require(cutoff >= -1 && cutoff <= 1, "filter_raters: cutoff must lie in [-1,1]");
  FilterResult out;
  for (const auto& r : records) (krippendorff_alpha(r) >= cutoff ? out.kept : out.dropped).push_back(r);
  return out;
}

}  // namespace aest::inline AEST_PREC
