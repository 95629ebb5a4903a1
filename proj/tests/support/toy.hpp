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

// Small datasets and configs shared by the training tests and the acceptance checks.

#include "aest/synth/dataset.hpp"
#include "aest/train.hpp"

namespace toy {

using namespace aest;

// Split dataset rendered at `resolution`.
inline Dataset dataset(std::size_t resolution, std::size_t rated, std::size_t unrated, std::uint64_t seed = 1) {
  DatasetOptions o;
  o.resolution = resolution;
  Dataset ds = build_dataset(rated, unrated, kDefaultRaters, seed, o);
  assign_splits(ds, seed);
  return ds;
}

// 4x4 images, K = 2, default loss weights.
inline TrainConfig toy_config(long steps = 500, std::uint64_t seed = 0) {
  TrainConfig c;
  c.model.embedding_dim = 2;
  c.model.base_width = 8;
  c.model.max_width = 8;
  c.model.predictor_hidden = 16;
  c.model.ladder = {4};
  c.steps_per_stage = {steps};
  c.rho = {4};
  c.batch_size = 16;
  c.seed = seed;
  c.eval_every = 100;
  return c;
}

inline Dataset toy_dataset(std::uint64_t seed = 1) { return dataset(4, 40, 200, seed); }

// Two-stage (4, 8) model for smoke and resume tests.
inline TrainConfig small_config(std::vector<long> steps = {50, 50}, std::uint64_t seed = 0) {
  TrainConfig c;
  c.model.embedding_dim = 8;
  c.model.base_width = 8;
  c.model.max_width = 16;
  c.model.predictor_hidden = 16;
  c.model.ladder = {4, 8};
  c.steps_per_stage = std::move(steps);
  c.rho = std::vector<int>(c.steps_per_stage.size(), 4);
  c.batch_size = 8;
  c.seed = seed;
  c.eval_every = 25;
  return c;
}

inline Dataset small_dataset(std::uint64_t seed = 1) { return dataset(8, 40, 120, seed); }

}  // namespace toy
