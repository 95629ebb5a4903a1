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

#include <optional>
#include <vector>

#include "aest/ops.hpp"
#include "aest/synth/schema.hpp"

namespace aest::inline AEST_PREC {

inline constexpr real kCrossEntropyEps = real(1e-8);

struct LossWeights {
  real w_pred = 1;
  real w_img = 1;
  real w_mask = real(0.5);
  real w_kl = real(0.1);  // value reached at the end of annealing
  real w_attr = real(0.5);
  real w_adv = real(0.2);
  long kl_anneal_steps = 0;  // 0 means "30% of the run", resolved by the trainer
  real kappa = 10;           // lower clamp on the encoder's adversarial term
  bool override_kl_ratio = false;

  // Nonnegative weights and w_kl <= w_img / 10 unless overridden.
  void validate() const;
  real kl_weight(long step) const;
};

struct LossBreakdown {
  double pred_l1 = 0;
  double img_l1 = 0;
  double mask_l1 = 0;
  double kl_prior = 0;
  double attr_ce = 0;
  double adv_kl_gen = 0;
  double loss_EP = 0;
  double loss_G = 0;

  friend bool operator==(const LossBreakdown&, const LossBreakdown&) = default;
};

double predictive_loss(double y, double y_hat);
// Mean |y - y_hat| over the rated rows of y_hat [N, 1]; 0 when no row is rated.
Var predictive_loss(Var y_hat, const std::vector<std::optional<real>>& y);

struct Reconstruction {
  Var img_l1;
  Var mask_l1;
};
// Per-sample means over channels and pixels, averaged over the batch.
Reconstruction reconstruction_loss(Var x, Var x_hat, Var m, Var m_hat);

// Batch mean of sum_k [(mu^2 + sigma^2)/2 - log sigma - 1/2].
Var kl_std_normal(Var mu, Var log_sigma);
double kl_std_normal(const std::vector<double>& mu, const std::vector<double>& sigma);

// Batch mean of -sum_c sum_l a log(softmax_c(logits) + eps).
Var attribute_cross_entropy(const AttributeSchema& schema, Var logits, const Tensor& targets);

// kl_std_normal over encodings of generated images.
Var adversarial_kl(Var mu, Var log_sigma);

struct LossTerms {
  Var pred, img, mask, kl, attr, adv;
};

struct Objectives {
  Var loss_EP;
  Var loss_G;
  LossBreakdown breakdown;
};

// loss_EP = w_pred pred + w_img img + w_mask mask + w_kl(step) kl + w_attr attr + max(-kappa, -w_adv adv)
// loss_G  = w_img img + w_mask mask + w_adv adv
Objectives total_losses(const LossTerms& terms, const LossWeights& weights, long step);

}  // namespace aest::inline AEST_PREC
