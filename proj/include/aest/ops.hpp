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

#include "aest/tape.hpp"

namespace aest::inline AEST_PREC {

// Elementwise (identical shapes).
Var add(Var a, Var b);
Var sub(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, real s);
Var add_scalar(Var a, real s);
// out = (1 - alpha) * a + alpha * b
Var blend(Var a, Var b, real alpha);
// Residual add: identical to add, kept separate for readability at call sites.
inline Var residual_add(Var x, Var fx) { return add(x, fx); }

Var leaky_relu(Var x, real slope);
Var sigmoid(Var x);
Var exp(Var x);
// log(x + eps)
Var log(Var x, real eps = real(0));
Var abs(Var x);
Var square(Var x);
// Hard clamp; gradient is zero outside [lo, hi].
Var clamp(Var x, real lo, real hi);

// Reductions to a scalar of shape [1].
Var sum(Var x);
Var mean(Var x);

Var reshape(Var x, Shape dims);

// Dense affine map: x[N,F], w[O,F], b[O] -> [N,O].
Var linear(Var x, Var w, Var b);
// Softmax over the last axis.
Var softmax(Var x);
// Columns [begin, end) of axis 1.
Var slice_axis1(Var x, std::size_t begin, std::size_t end);
// Concatenate along axis 1; all other dims must agree.
Var concat_axis1(const std::vector<Var>& parts);
// [N,A] -> [N,A,H,W] constant planes.
Var expand_planes(Var a, std::size_t height, std::size_t width);

// Spatial ops accept [C,H,W] (single image) or [N,C,H,W].
Var conv2d(Var input, Var kernels, int stride, int pad);
Var add_channel_bias(Var x, Var bias);
Var avg_pool2d(Var input, int window);
Var upsample_nearest(Var input, int factor);

// Value-only conveniences over a throwaway tape.
Tensor conv2d(const Tensor& input, const Tensor& kernels, int stride, int pad);
Tensor avg_pool2d(const Tensor& input, int window);
Tensor upsample_nearest(const Tensor& input, int factor);
Tensor leaky_relu(const Tensor& x, real slope);
Tensor softmax(const Tensor& x);

}  // namespace aest::inline AEST_PREC
