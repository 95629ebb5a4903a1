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

#include "aest/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "aest/errors.hpp"

namespace aest::inline AEST_PREC {

std::size_t shape_size(const Shape& dims) {
  return std::accumulate(dims.begin(), dims.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(dims[i]);
  }
  return s + "]";
}

Tensor::Tensor(Shape dims, real fill) : dims_(std::move(dims)) {
  for (auto d : dims_) require(d > 0, "tensor dims must be positive: " + shape_string(dims_));
  data_.assign(shape_size(dims_), fill);
}

Tensor::Tensor(Shape dims, std::vector<real> data) : dims_(std::move(dims)), data_(std::move(data)) {
  for (auto d : dims_) require(d > 0, "tensor dims must be positive: " + shape_string(dims_));
  require(shape_size(dims_) == data_.size(),
          "tensor data length " + std::to_string(data_.size()) + " does not match dims " +
              shape_string(dims_));
}

real& Tensor::at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) {
  const std::size_t r = dims_.size();
  const std::size_t W = dims_[r - 1], H = dims_[r - 2], C = dims_[r - 3];
  return data_[((n * C + c) * H + y) * W + x];
}

real Tensor::at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const {
  return const_cast<Tensor*>(this)->at(n, c, y, x);
}

real Tensor::item() const {
  require(data_.size() == 1, "item() on non-scalar tensor " + shape_string(dims_));
  return data_[0];
}

Tensor Tensor::reshaped(Shape dims) const {
  require(shape_size(dims) == data_.size(),
          "cannot reshape " + shape_string(dims_) + " to " + shape_string(dims));
  return Tensor(std::move(dims), data_);
}

void Tensor::fill(real v) { std::fill(data_.begin(), data_.end(), v); }

bool Tensor::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](real v) { return std::isfinite(v); });
}

}  // namespace aest::inline AEST_PREC
