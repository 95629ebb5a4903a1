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

#include "aest/tape.hpp"

#include "aest/errors.hpp"

namespace aest::inline AEST_PREC {

Var Tape::leaf(Tensor value, bool requires_grad) {
  nodes_.push_back(Node{std::move(value), {}, {}, requires_grad});
  return Var{this, static_cast<int>(nodes_.size() - 1)};
}

Var Tape::record(Tensor value, std::initializer_list<Var> parents, Backward backward) {
  return record(std::move(value), std::span<const Var>(parents.begin(), parents.size()),
                std::move(backward));
}

Var Tape::record(Tensor value, std::span<const Var> parents, Backward backward) {
  Node node;
  node.value = std::move(value);
  const int self = static_cast<int>(nodes_.size());
  for (const Var& p : parents) {
    if (p.tape != this) throw InternalError("operation mixes variables from different tapes");
    if (p.id < 0 || p.id >= self) throw InternalError("tape parent id out of order (cycle)");
    node.parents.push_back(p.id);
    node.requires_grad = node.requires_grad || nodes_[static_cast<std::size_t>(p.id)].requires_grad;
  }
  if (node.requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{this, self};
}

Tensor& Tape::grad_buffer(int id) {
  Tensor& g = grads_.at(static_cast<std::size_t>(id));
  if (g.empty()) g = Tensor::zeros_like(nodes_[static_cast<std::size_t>(id)].value);
  return g;
}

std::vector<Tensor> Tape::gradient(Var loss, std::span<const Var> wrt) {
  require(loss.tape == this, "loss variable belongs to another tape");
  require(value(loss.id).size() == 1,
          "gradient requires a scalar loss, got " + shape_string(value(loss.id).dims()));
  grads_.assign(nodes_.size(), Tensor());
  last_visits_ = 0;
  if (nodes_[static_cast<std::size_t>(loss.id)].requires_grad) {
    grad_buffer(loss.id).fill(real(1));
    for (int id = loss.id; id >= 0; --id) {
      Node& node = nodes_[static_cast<std::size_t>(id)];
      Tensor& g = grads_[static_cast<std::size_t>(id)];
      if (g.empty() || !node.backward) continue;
      for (int p : node.parents)
        if (p >= id) throw InternalError("cycle detected on tape");
      node.backward(*this, g);
      ++last_visits_;
    }
  }
  std::vector<Tensor> out;
  out.reserve(wrt.size());
  for (const Var& w : wrt) {
    require(w.tape == this, "gradient target belongs to another tape");
    Tensor& g = grads_.at(static_cast<std::size_t>(w.id));
    out.push_back(g.empty() ? Tensor::zeros_like(value(w.id)) : g);
  }
  grads_.clear();
  return out;
}

Tensor Tape::gradient(Var loss, Var wrt) {
  const Var targets[] = {wrt};
  return std::move(gradient(loss, targets).front());
}

}  // namespace aest::inline AEST_PREC
