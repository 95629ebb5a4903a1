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

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

#include "aest/config.hpp"

namespace aest::inline AEST_PREC {

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& dims);
std::string shape_string(const Shape& dims);

// Dense row-major array. Values are owned; copies are deep.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape dims, real fill = real(0));
  Tensor(Shape dims, std::vector<real> data);

  static Tensor scalar(real v) { return Tensor(Shape{1}, std::vector<real>{v}); }
  static Tensor zeros_like(const Tensor& t) { return Tensor(t.dims()); }

  const Shape& dims() const { return dims_; }
  std::size_t dim(std::size_t axis) const { return dims_.at(axis); }
  std::size_t rank() const { return dims_.size(); }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  real* data() { return data_.data(); }
  const real* data() const { return data_.data(); }
  std::span<real> values() { return data_; }
  std::span<const real> values() const { return data_; }
  const std::vector<real>& storage() const { return data_; }

  real& operator[](std::size_t i) { return data_[i]; }
  real operator[](std::size_t i) const { return data_[i]; }

  // 4-D accessor (n, c, y, x); also used for 3-D tensors with n == 0.
  real& at(std::size_t n, std::size_t c, std::size_t y, std::size_t x);
  real at(std::size_t n, std::size_t c, std::size_t y, std::size_t x) const;

  real item() const;
  bool is_scalar() const { return data_.size() == 1; }

  Tensor reshaped(Shape dims) const;
  void fill(real v);
  bool all_finite() const;

  friend bool operator==(const Tensor& a, const Tensor& b) = default;

 private:
  Shape dims_;
  std::vector<real> data_;
};

}  // namespace aest::inline AEST_PREC
