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

#include <functional>
#include <span>
#include <vector>

#include "aest/tensor.hpp"

namespace aest::inline AEST_PREC {

class Tape;

// Handle to a node on a tape. Cheap to copy; valid while the tape lives.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  const Shape& dims() const { return value().dims(); }
  bool valid() const { return tape != nullptr && id >= 0; }
};

// Wengert list for reverse-mode differentiation. Nodes are appended in
// evaluation order, so every parent id is smaller than its child's id and a
// single reverse sweep visits each node once.
class Tape {
 public:
  using Backward = std::function<void(Tape&, const Tensor& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  // Appends an operation result. `backward` is dropped when no parent needs
  // a gradient.
  Var record(Tensor value, std::initializer_list<Var> parents, Backward backward);
  Var record(Tensor value, std::span<const Var> parents, Backward backward);

  const Tensor& value(int id) const { return nodes_.at(static_cast<std::size_t>(id)).value; }
  bool requires_grad(int id) const { return nodes_.at(static_cast<std::size_t>(id)).requires_grad; }
  bool requires_grad(Var v) const { return requires_grad(v.id); }

  // Gradient accumulator for a node during a backward sweep (zero-initialized
  // on first access). Only meaningful for nodes that require a gradient.
  Tensor& grad_buffer(int id);

  // d(loss)/d(w) for each w. Nodes that do not influence the loss get zeros.
  std::vector<Tensor> gradient(Var loss, std::span<const Var> wrt);
  Tensor gradient(Var loss, Var wrt);

  std::size_t size() const { return nodes_.size(); }
  // Number of backward closures run by the most recent gradient() call.
  std::size_t last_backward_visits() const { return last_visits_; }

 private:
  struct Node {
    Tensor value;
    std::vector<int> parents;
    Backward backward;
    bool requires_grad = false;
  };
  std::vector<Node> nodes_;
  std::vector<Tensor> grads_;
  std::size_t last_visits_ = 0;
};

inline const Tensor& Var::value() const { return tape->value(id); }

}  // namespace aest::inline AEST_PREC
