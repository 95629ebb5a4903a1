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

#include "aest/synth/design.hpp"

#include <algorithm>
#include <cmath>

#include "aest/errors.hpp"
#include "aest/rng.hpp"

namespace aest::inline AEST_PREC {

namespace {

constexpr double kBackground = 1.0;
constexpr double kWheelTone = 0.08;
constexpr double kCabinTone = 0.55;  // relative to the body shade
constexpr double kShear = 0.15;
constexpr double kWheelDrop = 0.35;

enum Region { kNone = 0, kBody = 1, kCabin = 2, kWheel = 3 };

// Silhouette geometry in normalized frame coordinates (u right, v up).
struct Geometry {
  double x0, width, body_bottom, body_height, cabin_height;
  double body_radius, wheel_radius, belt_rise;
  double cabin_base_half, cabin_top_half, cabin_radius, center_x, center_v;
  bool three_quarter;

  Geometry(const ShapeParams& p, bool tq) : three_quarter(tq) {
    width = std::min({0.94, 0.78 / p.aspect, std::sqrt(0.62 / p.aspect)});
    const double height = p.aspect * width;
    cabin_height = p.greenhouse * height;
    body_height = height - cabin_height;
    wheel_radius = p.wheel * std::min(body_height, 0.5 * width);
    belt_rise = 0.1 * p.beltline * std::min(body_height, 0.5 * width);
    body_radius = p.roundness * 0.45 * std::min(width, body_height);
    const double inset = 0.02 + 0.18 * p.roundness * p.roundness;
    cabin_base_half = (0.5 - inset) * width;
    cabin_top_half = std::max(0.05 * width, cabin_base_half - (0.02 + 0.16 * p.roundness * p.roundness) * width);
    cabin_radius = p.roundness * 0.9 * std::min(cabin_height, cabin_top_half);
    x0 = 0.5 - 0.5 * width;
    center_x = 0.5;
    // Vertical extent: wheel bottoms (kWheelDrop radii below the body) to
    // roof, with the roof raised by the beltline rise at its highest point.
    const double bottom = -kWheelDrop * wheel_radius;
    const double top = body_height + std::abs(belt_rise) + cabin_height;
    body_bottom = 0.5 - 0.5 * (top + bottom);
    center_v = 0.5;
  }

  // Local beltline height above body_bottom at horizontal position u.
  double belt(double u) const {
    const double t = (u - x0) / width;
    return body_height + belt_rise * (2 * t - 1);
  }

  Region region(double u, double v) const {
    if (three_quarter) u += kShear * (v - center_v);
    // wheels
    const double wy = body_bottom + (1 - kWheelDrop) * wheel_radius;
    for (double fx : {0.2, 0.8}) {
      const double dx = u - (x0 + fx * width), dy = v - wy;
      if (dx * dx + dy * dy <= wheel_radius * wheel_radius) return kWheel;
    }
    if (u < x0 || u > x0 + width) return kNone;
    const double local = belt(u);
    const double rel = v - body_bottom;
    if (rel >= 0 && rel <= local) {
      // Map the sloped top to a flat rectangle and test the rounded corners.
      const double y = rel * body_height / local;
      const double du = std::min(u - x0, x0 + width - u);
      const double dv = std::min(y, body_height - y);
      if (du >= body_radius || dv >= body_radius) return kBody;
      const double cx = body_radius - du, cy = body_radius - dv;
      if (cx * cx + cy * cy <= body_radius * body_radius) return kBody;
      return kNone;
    }
    const double q = rel - local;  // height above the beltline
    if (q > 0 && q <= cabin_height) {
      const double half = cabin_base_half + (cabin_top_half - cabin_base_half) * (q / cabin_height);
      const double dx = std::abs(u - center_x);
      if (dx > half) return kNone;
      const double r = cabin_radius;
      if (q > cabin_height - r && dx > half - r) {
        const double cx = dx - (half - r), cy = q - (cabin_height - r);
        if (cx * cx + cy * cy > r * r) return kNone;
      }
      return kCabin;
    }
    return kNone;
  }
};

double shade_level(std::size_t shade, double t) {
  static constexpr double lo[] = {0.75, 0.45, 0.15};
  static constexpr double hi[] = {0.90, 0.60, 0.30};
  return lo[shade] + (hi[shade] - lo[shade]) * t;
}

}  // namespace

std::string split_name(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    case Split::none: break;
  }
  return "none";
}

Split parse_split(const std::string& s) {
  if (s == "train") return Split::train;
  if (s == "val") return Split::val;
  if (s == "test") return Split::test;
  if (s == "none") return Split::none;
  throw FormatError("unknown split tag '" + s + "'");
}

void ShapeParams::validate() const {
  auto in = [](double v, double lo, double hi) { return std::isfinite(v) && v >= lo && v <= hi; };
  require(in(aspect, 0.3, 1.3), "aspect out of [0.3,1.3]");
  require(in(roundness, 0, 1), "roundness out of [0,1]");
  require(in(beltline, -1, 1), "beltline slope out of [-1,1]");
  require(in(wheel, 0.1, 0.4), "wheel size out of [0.1,0.4]");
  require(in(greenhouse, 0.2, 0.6), "greenhouse ratio out of [0.2,0.6]");
}

WorldAttributes world_attributes(const AttributeSchema& schema, const AttributeAssignment& a) {
  schema.validate(a);
  WorldAttributes w;
  w.bodytype = a[schema.index_of("bodytype")];
  w.three_quarter = a[schema.index_of("viewpoint")] == 1;
  w.shade = a[schema.index_of("shade")];
  require(w.bodytype < 3 && w.shade < 3, "synthetic world expects 3 body types and 3 shades");
  return w;
}

ShapeParams draw_params(std::uint64_t seed, std::size_t bodytype) {
  require(bodytype < 3, "unknown body type index");
  Rng rng(Rng::mix(seed, 0x5A17E));
  ShapeParams p;
  p.aspect = rng.uniform(0.3, 1.3);
  p.wheel = rng.uniform(0.1, 0.4);
  p.greenhouse = rng.uniform(0.2, 0.6);
  p.beltline = rng.uniform(-1, 1);
  switch (bodytype) {
    case 0: p.roundness = rng.uniform(0, 0.25); break;
    case 1: {
      p.roundness = rng.uniform(0.25, 0.6);
      const double mag = rng.uniform(0.3, 1.0);
      p.beltline = rng.uniform() < 0.5 ? -mag : mag;
      break;
    }
    default: p.roundness = rng.uniform(0.6, 1.0); break;
  }
  return p;
}

void check_consistent(const ShapeParams& p, std::size_t bodytype) {
  p.validate();
  switch (bodytype) {
    case 0: require(p.roundness <= 0.25, "boxy body type requires roundness in [0,0.25]"); break;
    case 1:
      require(p.roundness >= 0.25 && p.roundness <= 0.6, "wedge body type requires roundness in [0.25,0.6]");
      require(std::abs(p.beltline) >= 0.3, "wedge body type requires |beltline| >= 0.3");
      break;
    default: require(p.roundness >= 0.6, "rounded body type requires roundness in [0.6,1]"); break;
  }
}

Design generate_design(std::uint64_t seed, const AttributeSchema& schema, const AttributeAssignment& attrs,
                       const std::optional<ShapeParams>& params, const RenderOptions& options) {
  const WorldAttributes world = world_attributes(schema, attrs);
  require(options.resolution >= 2 && options.supersample >= 1, "bad render options");
  require(options.channels == 1 || options.channels == 3, "render channels must be 1 or 3");
  ShapeParams p = params ? *params : draw_params(seed, world.bodytype);
  check_consistent(p, world.bodytype);

  Rng tone_rng(Rng::mix(seed, 0x7013));
  const double body = shade_level(world.shade, tone_rng.uniform());
  const double tones[] = {kBackground, body, body * kCabinTone, kWheelTone};

  const Geometry geo(p, world.three_quarter);
  const std::size_t n = options.resolution;
  const int ss = options.supersample;
  Tensor image({options.channels, n, n});
  Tensor mask({1, n, n});
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      double tone = 0;
      int covered = 0;
      for (int sy = 0; sy < ss; ++sy)
        for (int sx = 0; sx < ss; ++sx) {
          const double u = (static_cast<double>(x) + (sx + 0.5) / ss) / static_cast<double>(n);
          const double v = 1.0 - (static_cast<double>(y) + (sy + 0.5) / ss) / static_cast<double>(n);
          const Region r = geo.region(u, v);
          tone += tones[r];
          covered += r != kNone;
        }
      const double samples = static_cast<double>(ss * ss);
      // Values are rounded through binary32 so datasets round-trip the
      // 32-bit file format exactly in either precision.
      const real value = static_cast<real>(static_cast<float>(tone / samples));
      for (std::size_t c = 0; c < options.channels; ++c) image.at(0, c, y, x) = value;
      mask.at(0, 0, y, x) = 2 * covered >= ss * ss ? real(1) : real(0);
    }

  Design d;
  d.params = p;
  d.sample.image = std::move(image);
  d.sample.mask = std::move(mask);
  d.sample.attributes = attrs;
  d.sample.design = p;
  return d;
}

Tensor render_mask(const ShapeParams& p, bool three_quarter, std::size_t resolution, int supersample) {
  const Geometry geo(p, three_quarter);
  const std::size_t n = resolution;
  Tensor mask({1, n, n});
  for (std::size_t y = 0; y < n; ++y)
    for (std::size_t x = 0; x < n; ++x) {
      int covered = 0;
      for (int sy = 0; sy < supersample; ++sy)
        for (int sx = 0; sx < supersample; ++sx) {
          const double u = (static_cast<double>(x) + (sx + 0.5) / supersample) / static_cast<double>(n);
          const double v = 1.0 - (static_cast<double>(y) + (sy + 0.5) / supersample) / static_cast<double>(n);
          covered += geo.region(u, v) != kNone;
        }
      mask.at(0, 0, y, x) = 2 * covered >= supersample * supersample ? real(1) : real(0);
    }
  return mask;
}

double oracle_rating(const ShapeParams& p) {
  p.validate();
  const double y = 3 + 2 * p.roundness - 3 * std::abs(p.aspect - 0.55) - 2 * std::abs(p.greenhouse - 0.35);
  return std::clamp(y, 1.0, 5.0);
}

double rectangularity(const Tensor& mask) {
  const std::size_t h = mask.dim(mask.rank() - 2), w = mask.dim(mask.rank() - 1);
  std::size_t y0 = h, y1 = 0, x0 = w, x1 = 0, area = 0;
  for (std::size_t y = 0; y < h; ++y)
    for (std::size_t x = 0; x < w; ++x)
      if (mask[y * w + x] > real(0.5)) {
        ++area;
        y0 = std::min(y0, y), y1 = std::max(y1, y), x0 = std::min(x0, x), x1 = std::max(x1, x);
      }
  if (area == 0) return 0;
  return static_cast<double>(area) / static_cast<double>((y1 - y0 + 1) * (x1 - x0 + 1));
}

double mask_fraction(const Tensor& mask) {
  double s = 0;
  for (real v : mask.values()) s += v;
  return s / static_cast<double>(mask.size());
}

}  // namespace aest::inline AEST_PREC
