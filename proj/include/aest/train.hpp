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
#include <filesystem>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "aest/losses.hpp"
#include "aest/nets.hpp"
#include "aest/synth/dataset.hpp"

namespace aest::inline AEST_PREC {

struct AdamState {
  std::vector<Tensor> m, v;  // one pair per parameter of the owning role
  long t = 0;
};

struct AdamOptions {
  double lr = 2e-4;
  double b1 = 0.9;
  double b2 = 0.999;
  double eps = 1e-8;
};

AdamState make_adam_state(const ParameterSet& params, Role role);

// Updates params[indices[k]] with grads[k]. Throws DivergenceError before
// touching anything when a gradient is not finite.
void adam_step(ParameterSet& params, const std::vector<std::size_t>& indices, const std::vector<Tensor>& grads,
               AdamState& state, const AdamOptions& options, const std::string& term = "gradient");

struct TrainConfig {
  ModelConfig model;
  std::vector<long> steps_per_stage = {1500, 1500, 1500, 1500};
  std::vector<int> rho = {4, 4, 4, 4};  // generator steps per encoder/predictor step
  std::size_t batch_size = 32;
  AdamOptions adam;
  LossWeights weights;
  std::uint64_t seed = 0;
  double rated_fraction = 0.25;         // rated share of every real batch
  double unknown_attr_fraction = 0.25;  // samples whose attributes are hidden from the encoder
  double tau_start = 1.0;
  double tau_end = 0.3;
  long eval_every = 0;  // 0 means once per epoch over the training split

  void validate() const;
  long total_steps() const;
  long stage_start(std::size_t stage) const;
  long kl_anneal_steps() const;  // resolves the "30% of the run" default
  double tau(long step) const;
};

TrainConfig train_config_from_json(const std::string& text);
std::string train_config_to_json(const TrainConfig& cfg);
TrainConfig load_train_config(const std::filesystem::path& path);

struct Schedule {
  std::size_t stage = 0;
  std::size_t resolution = 4;
  real alpha = 1;
};
Schedule progressive_schedule(long step, const TrainConfig& cfg);
bool is_generator_step(long step, const TrainConfig& cfg);

// Everything needed to continue training bitwise.
struct TrainState {
  ParameterSet params;
  AdamState adam_E, adam_G, adam_P;
  Rng rng;
  long step = 0;

  AdamState& adam(Role r);
};

TrainState init_train_state(const TrainConfig& cfg, const AttributeSchema& schema);

// Training/validation samples pre-scaled to each stage resolution.
class StagedData {
 public:
  StagedData(const Dataset& ds, const ModelConfig& model);

  std::size_t size() const { return ids_.size(); }
  const std::vector<std::optional<real>>& ratings() const { return ratings_; }
  const std::vector<AttributeAssignment>& attributes() const { return attrs_; }
  const std::vector<std::size_t>& rated() const { return rated_; }
  const std::vector<std::size_t>& unrated() const { return unrated_; }
  const std::vector<std::string>& ids() const { return ids_; }

  // Stacked [n, C, R, R] images and [n, 1, R, R] masks for the chosen rows.
  Tensor images(const std::vector<std::size_t>& rows, std::size_t resolution) const;
  Tensor masks(const std::vector<std::size_t>& rows, std::size_t resolution) const;

 private:
  std::vector<std::size_t> ladder_;
  std::size_t channels_ = 3;
  std::vector<std::string> ids_;
  std::vector<std::optional<real>> ratings_;
  std::vector<AttributeAssignment> attrs_;
  std::vector<std::size_t> rated_, unrated_;
  std::vector<std::vector<Tensor>> images_, masks_;  // [stage][sample]
};

struct StepResult {
  LossBreakdown losses;
  Schedule schedule;
  bool generator_step = false;
  bool finite = true;
  std::string divergent_term;  // set when finite is false
};

StepResult train_step(const StagedData& data, TrainState& state, const TrainConfig& cfg);

struct MetricRecord {
  long step = 0;
  std::size_t stage = 0;
  double alpha = 1;
  LossBreakdown losses;
  std::optional<double> val_mae;
};
std::string metric_json(const MetricRecord& r);

// Clamped-prediction MAE of predict(mu) over the rated rows of `data`.
double validation_mae(const StagedData& data, ParameterSet& params, const Schedule& schedule);

struct FitOptions {
  std::optional<std::filesystem::path> out_dir;  // checkpoints per stage and at the end
  std::ostream* metrics = nullptr;               // JSONL records
  long stop_at = -1;                             // stop before this step (for resume tests)
  std::function<void(const MetricRecord&)> on_step;
};

// Runs train_step from state.step to the end of the schedule (or stop_at).
void fit(const Dataset& ds, const TrainConfig& cfg, TrainState& state, const FitOptions& options = {});

void save_checkpoint(const std::filesystem::path& dir, const TrainState& state, const TrainConfig& cfg);
struct Checkpoint {
  TrainConfig config;
  TrainState state;
  std::string id;
};
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace aest::inline AEST_PREC
