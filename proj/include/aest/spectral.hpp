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

#include <vector>

#include "aest/rng.hpp"
#include "aest/tape.hpp"

namespace aest::inline AEST_PREC {

// Power-iteration state for one weight matrix: the running estimate of its
// left singular vector (unit norm, length = rows).
struct SpectralState {
  std::vector<real> u;

  static SpectralState random(std::size_t rows, Rng& rng);
  friend bool operator==(const SpectralState&, const SpectralState&) = default;
};

struct SpectralResult {
  Var weight;           // W / sigma
  real sigma = 0;       // power-iteration estimate of the top singular value
  bool degenerate = false;
};

// Divides W (viewed as rows x rest) by its estimated top singular value after
// `iters` warm-started power-iteration steps on `state`. iters == 0 reuses the
// stored vector unchanged, which makes the map a fixed differentiable
// function of W (used by the finite-difference checks).
//
// sigma = |W^T u|, so d(sigma)/dW = u v^T with v = W^T u / sigma.
SpectralResult spectral_normalize(Var w, SpectralState& state, int iters);

// Value form: returns (W / sigma, updated state). `degenerate` is set when W
// is (numerically) zero, in which case W is returned unchanged. iters >= 1.
struct SpectralValue {
  Tensor weight;
  SpectralState state;
  real sigma = 0;
  bool degenerate = false;
};
SpectralValue spectral_normalize(const Tensor& w, SpectralState state, int iters);

}  // namespace aest::inline AEST_PREC
