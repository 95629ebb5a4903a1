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

#include "aest/spectral.hpp"

#include <cmath>

#include "aest/errors.hpp"

namespace aest::inline AEST_PREC {

namespace {

constexpr double kDegenerate = 1e-12;

// Accumulates in double so the normalization is stable in both precisions.
double normalize(std::vector<double>& v) {
  double n = 0;
  for (double x : v) n += x * x;
  n = std::sqrt(n);
  if (n > kDegenerate)
    for (double& x : v) x /= n;
  return n;
}

struct PowerResult {
  std::vector<double> u, v;
  double sigma = 0;
};

// v = W^T u / |W^T u|, sigma = |W^T u|, after `iters` refinements of u.
PowerResult power_iterate(const Tensor& w, std::vector<real>& u_state, int iters) {
  const std::size_t m = w.dim(0);
  const std::size_t n = w.size() / m;
  require(u_state.size() == m, "spectral_normalize: state length " + std::to_string(u_state.size()) +
                                   " does not match " + std::to_string(m) + " rows");
  std::vector<double> u(u_state.begin(), u_state.end()), v(n);
  auto wt_u = [&] {
    std::fill(v.begin(), v.end(), 0.0);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j) v[j] += static_cast<double>(w[i * n + j]) * u[i];
  };
  for (int it = 0; it < iters; ++it) {
    wt_u();
    if (normalize(v) <= kDegenerate) break;
    for (std::size_t i = 0; i < m; ++i) {
      double acc = 0;
      for (std::size_t j = 0; j < n; ++j) acc += static_cast<double>(w[i * n + j]) * v[j];
      u[i] = acc;
    }
    if (normalize(u) <= kDegenerate) break;
  }
  wt_u();
  const double sigma = normalize(v);
  for (std::size_t i = 0; i < m; ++i) u_state[i] = static_cast<real>(u[i]);
  return {std::move(u), std::move(v), sigma};
}

}  // namespace

SpectralState SpectralState::random(std::size_t rows, Rng& rng) {
  std::vector<double> u(rows);
  for (double& x : u) x = rng.normal();
  if (normalize(u) <= kDegenerate) u.assign(rows, 1.0 / std::sqrt(static_cast<double>(rows)));
  return SpectralState{std::vector<real>(u.begin(), u.end())};
}

SpectralResult spectral_normalize(Var w, SpectralState& state, int iters) {
  const Tensor& wv = w.value();
  require(wv.rank() >= 2, "spectral_normalize: weight must have rank >= 2");
  require(iters >= 0, "spectral_normalize: iters must be non-negative");
  PowerResult pr = power_iterate(wv, state.u, iters);
  if (pr.sigma <= kDegenerate) {
    return {w.tape->record(wv, {w}, [wid = w.id](Tape& t, const Tensor& g) {
              Tensor& gw = t.grad_buffer(wid);
              for (std::size_t i = 0; i < g.size(); ++i) gw[i] += g[i];
            }),
            real(0), true};
  }
  const std::size_t m = wv.dim(0), n = wv.size() / m;
  const double sigma = pr.sigma;
  Tensor y(wv.dims());
  for (std::size_t i = 0; i < wv.size(); ++i) y[i] = static_cast<real>(wv[i] / sigma);
  const int wid = w.id;
  Var out = w.tape->record(std::move(y), {w}, [wid, m, n, sigma, u = pr.u, v = pr.v](Tape& t, const Tensor& g) {
    // d(W/s) = dW/s - W (u^T dW v) / s^2
    const Tensor& wv = t.value(wid);
    double gw_dot = 0;
    for (std::size_t i = 0; i < g.size(); ++i) gw_dot += static_cast<double>(g[i]) * wv[i];
    const double c = gw_dot / (sigma * sigma);
    Tensor& gw = t.grad_buffer(wid);
    for (std::size_t i = 0; i < m; ++i)
      for (std::size_t j = 0; j < n; ++j)
        gw[i * n + j] += static_cast<real>(g[i * n + j] / sigma - c * u[i] * v[j]);
  });
  return {out, static_cast<real>(sigma), false};
}

SpectralValue spectral_normalize(const Tensor& w, SpectralState state, int iters) {
  require(iters >= 1, "spectral_normalize: iters must be >= 1");
  Tape tape;
  SpectralResult r = spectral_normalize(tape.constant(w), state, iters);
  return {r.weight.value(), std::move(state), r.sigma, r.degenerate};
}

}  // namespace aest::inline AEST_PREC
