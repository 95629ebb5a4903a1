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
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "aest/ops.hpp"
#include "aest/rng.hpp"
#include "aest/spectral.hpp"
#include "aest/synth/schema.hpp"

namespace aest::inline AEST_PREC {

inline constexpr real kLogSigmaMin = -4;
inline constexpr real kLogSigmaMax = 2;
inline constexpr real kLeakSlope = real(0.2);

enum class Role { E, G, P };
char role_code(Role r);
Role parse_role(char c);

struct ModelConfig {
  std::size_t embedding_dim = 64;
  std::size_t base_width = 32;  // channels at the finest resolution
  std::size_t max_width = 128;
  std::size_t predictor_hidden = 64;
  std::size_t image_channels = 3;
  std::vector<std::size_t> ladder = {4, 8, 16, 32};

  void validate() const;
  std::size_t width(std::size_t resolution) const;
  std::size_t stage_of(std::size_t resolution) const;  // contract violation when not in the ladder
  std::size_t full_resolution() const { return ladder.back(); }
};

struct StageConfig {
  std::size_t stage = 0;  // index into the ladder
  real alpha = 1;         // weight of the newest resolution when blending
};

struct Parameter {
  std::string name;
  Role role = Role::E;
  Tensor value;
  bool spectral = false;  // weight matrices pass through spectral normalization
  SpectralState sn;
};

// beta_E, beta_G and beta_P, stored as one list with disjoint roles.
class ParameterSet {
 public:
  ParameterSet() = default;
  ParameterSet(const ModelConfig& model, const AttributeSchema& schema, std::uint64_t seed);

  const ModelConfig& model() const { return model_; }
  const AttributeSchema& schema() const { return schema_; }

  std::size_t size() const { return params_.size(); }
  Parameter& operator[](std::size_t i) { return params_[i]; }
  const Parameter& operator[](std::size_t i) const { return params_[i]; }
  std::size_t index(const std::string& name) const;
  std::vector<std::size_t> indices(Role role) const;

  // Parameters only used once the given stage is active.
  std::vector<std::size_t> stage_parameters(std::size_t stage) const;
  // He-uniform initialization of one parameter (biases are zeroed).
  void initialize(std::size_t i, Rng& rng);

  void add(Parameter p, std::size_t stage);

 private:
  ModelConfig model_;
  AttributeSchema schema_;
  std::vector<Parameter> params_;
  std::vector<std::size_t> stage_;
  std::map<std::string, std::size_t> by_name_;
};

// One forward pass over a ParameterSet. Parameters enter the tape lazily;
// every spectrally normalized weight is normalized at most once per pass.
// update_spectral=false runs the power iteration on a scratch copy of the
// state; spectral_iters=0 freezes it, making every weight a fixed function of
// its raw value (used by finite-difference checks).
class NetContext {
 public:
  NetContext(Tape& tape, ParameterSet& params, std::vector<Role> trainable, bool update_spectral = true,
             int spectral_iters = 1);

  Tape& tape() { return tape_; }
  const ParameterSet& params() const { return params_; }
  Var param(const std::string& name);
  Var weight(const std::string& name);  // spectrally normalized when flagged
  std::size_t spectral_calls() const { return spectral_calls_; }
  std::size_t spectral_calls(const std::string& name) const;
  // Parameters that entered this pass, with their tape variables.
  const std::map<std::size_t, Var>& leaves() const { return leaves_; }

 private:
  Tape& tape_;
  ParameterSet& params_;
  std::vector<Role> trainable_;
  bool update_spectral_;
  int spectral_iters_;
  std::map<std::size_t, Var> leaves_;
  std::map<std::size_t, Var> normalized_;
  std::map<std::size_t, std::size_t> calls_;
  std::size_t spectral_calls_ = 0;
};

struct Encoding {
  Var mu;         // [N, K]
  Var log_sigma;  // [N, K], clamped to [kLogSigmaMin, kLogSigmaMax]
  Var logits;     // [N, total attribute levels]
};

struct Generated {
  Var image;  // [N, C_img, R, R]
  Var mask;   // [N, 1, R, R]
};

// Attributes enter as [N, total levels] rows: one-hot, soft, or uniform for unknown.
Tensor one_hot_batch(const AttributeSchema& schema, const std::vector<AttributeAssignment>& attrs);
Tensor uniform_attributes(const AttributeSchema& schema, std::size_t n);

Encoding encode(NetContext& net, Var images, Var attributes, const StageConfig& stage);
Generated generate(NetContext& net, Var h, Var attributes, const StageConfig& stage);
Var predict(NetContext& net, Var h);  // [N, 1]

Var reparameterize(Var mu, Var log_sigma, const Tensor& noise);
Var gumbel_softmax(Var logits, real tau, const Tensor& gumbel_noise);

enum class AttributeMode { hard, soft };
// Per-attribute argmax (hard, as one-hot rows) or Gumbel-Softmax probabilities (soft).
Var classify_attributes(const AttributeSchema& schema, Var logits, AttributeMode mode, real tau,
                        const Tensor& gumbel_noise);
std::vector<AttributeAssignment> hard_attributes(const AttributeSchema& schema, const Tensor& logits);

}  // namespace aest::inline AEST_PREC
