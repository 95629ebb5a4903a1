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
#include <optional>
#include <string>

#include "aest/synth/schema.hpp"
#include "aest/tensor.hpp"

namespace aest::inline AEST_PREC {

// Hidden design factors of a synthetic product silhouette.
struct ShapeParams {
  double aspect = 0.55;     // height / width, [0.3, 1.3]
  double roundness = 0.5;   // [0, 1]
  double beltline = 0.0;    // slope, [-1, 1]
  double wheel = 0.25;      // [0.1, 0.4]
  double greenhouse = 0.35; // cabin share of height, [0.2, 0.6]

  void validate() const;
  friend bool operator==(const ShapeParams&, const ShapeParams&) = default;
};

enum class Split { none, train, val, test };
std::string split_name(Split s);
Split parse_split(const std::string& s);

struct ImageSample {
  std::string id;
  Tensor image;  // [C_img, H, W], values in [0, 1]
  Tensor mask;   // [1, H, W], values in {0, 1}
  AttributeAssignment attributes;
  std::optional<real> rating;  // mean rating in [1, 5] when rated
  std::int64_t group = 0;      // design family
  Split split = Split::none;
  std::optional<ShapeParams> design;  // ground truth for synthetic samples

  bool rated() const { return rating.has_value(); }
};

struct RenderOptions {
  std::size_t resolution = 32;
  std::size_t channels = 1;
  int supersample = 4;
};

struct Design {
  ImageSample sample;
  ShapeParams params;
};

// The synthetic world understands the default attribute names; other
// schemas must include bodytype, viewpoint and shade.
struct WorldAttributes {
  std::size_t bodytype = 0;   // 0 boxy, 1 wedge, 2 rounded
  bool three_quarter = false;
  std::size_t shade = 0;      // 0 light, 1 mid, 2 dark
};
WorldAttributes world_attributes(const AttributeSchema& schema, const AttributeAssignment& a);

// Deterministic parameter draw consistent with the body type.
ShapeParams draw_params(std::uint64_t seed, std::size_t bodytype);
void check_consistent(const ShapeParams& p, std::size_t bodytype);

Design generate_design(std::uint64_t seed, const AttributeSchema& schema, const AttributeAssignment& attrs,
                       const std::optional<ShapeParams>& params = std::nullopt,
                       const RenderOptions& options = {});

// Binary silhouette only (no shading), rendered with the same geometry.
Tensor render_mask(const ShapeParams& p, bool three_quarter, std::size_t resolution, int supersample = 2);

// The hidden taste of the synthetic world, clamped to [1, 5].
double oracle_rating(const ShapeParams& p);

// Mask area over bounding-box area; 0 for an empty mask.
double rectangularity(const Tensor& mask);
double mask_fraction(const Tensor& mask);

}  // namespace aest::inline AEST_PREC
