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

#include "aest/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "aest/errors.hpp"

namespace aest::inline AEST_PREC {

void LossWeights::validate() const {
  for (real w : {w_pred, w_img, w_mask, w_kl, w_attr, w_adv})
    require(w >= 0 && std::isfinite(w), "loss weights must be finite and nonnegative");
  require(kl_anneal_steps >= 0, "kl_anneal_steps must be nonnegative");
  require(kappa > 0, "kappa must be positive");
  if (!override_kl_ratio)
    require(w_kl <= w_img / 10 + real(1e-12),
            "w_kl must not exceed w_img/10 (set override_kl_ratio to allow it)");
}

real LossWeights::kl_weight(long step) const {
  if (kl_anneal_steps <= 0) return w_kl;
  const double f = std::min(1.0, static_cast<double>(std::max(0L, step)) / static_cast<double>(kl_anneal_steps));
  return static_cast<real>(w_kl * f);
}

double predictive_loss(double y, double y_hat) { return std::abs(y - y_hat); }

Var predictive_loss(Var y_hat, const std::vector<std::optional<real>>& y) {
  const Shape d = y_hat.dims();
  require(d.size() == 2 && d[1] == 1 && d[0] == y.size(), "predictive_loss: expected predictions [N,1] for N targets");
  const std::size_t rated = static_cast<std::size_t>(std::count_if(y.begin(), y.end(), [](auto& v) { return v.has_value(); }));
  Tensor target(d), weight(d);
  for (std::size_t i = 0; i < y.size(); ++i)
    if (y[i]) {
      target[i] = *y[i];
      weight[i] = real(1) / static_cast<real>(rated);
    }
  Tape& t = *y_hat.tape;
  return sum(mul(abs(sub(y_hat, t.constant(std::move(target)))), t.constant(std::move(weight))));
}

Reconstruction reconstruction_loss(Var x, Var x_hat, Var m, Var m_hat) {
  require(x.dims() == x_hat.dims(), "reconstruction_loss: image shapes differ: " + shape_string(x.dims()) + " vs " +
                                        shape_string(x_hat.dims()));
  require(m.dims() == m_hat.dims(), "reconstruction_loss: mask shapes differ: " + shape_string(m.dims()) + " vs " +
                                        shape_string(m_hat.dims()));
  return {mean(abs(sub(x, x_hat))), mean(abs(sub(m, m_hat)))};
}

Var kl_std_normal(Var mu, Var log_sigma) {
  require(mu.dims() == log_sigma.dims() && mu.dims().size() == 2, "kl_std_normal: expected mu, log_sigma [N,K]");
  const std::size_t n = mu.dims()[0];
  require(n > 0, "kl_std_normal: empty batch");
  Var terms = sub(scale(add(square(mu), exp(scale(log_sigma, 2))), real(0.5)), log_sigma);
  return scale(sum(add_scalar(terms, real(-0.5))), real(1) / static_cast<real>(n));
}

double kl_std_normal(const std::vector<double>& mu, const std::vector<double>& sigma) {
  require(mu.size() == sigma.size(), "kl_std_normal: mu and sigma lengths differ");
  double kl = 0;
  for (std::size_t k = 0; k < mu.size(); ++k) {
    require(sigma[k] > 0, "kl_std_normal: sigma must be positive");
    kl += 0.5 * (mu[k] * mu[k] + sigma[k] * sigma[k]) - std::log(sigma[k]) - 0.5;
  }
  return kl;
}

Var attribute_cross_entropy(const AttributeSchema& schema, Var logits, const Tensor& targets) {
  const Shape d = logits.dims();
  require(d.size() == 2 && d[1] == schema.total_levels(), "attribute_cross_entropy: logits must be [N, total levels]");
  require(targets.dims() == d, "attribute_cross_entropy: targets must match logits");
  const std::size_t n = d[0];
  Tape& t = *logits.tape;
  Var total;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const std::size_t b = schema.offset(c), e = b + schema[c].levels.size();
    Tensor a({n, e - b});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = b; k < e; ++k) a[i * (e - b) + k - b] = targets[i * d[1] + k];
    Var term = sum(mul(log(softmax(slice_axis1(logits, b, e)), kCrossEntropyEps), t.constant(std::move(a))));
    total = total.valid() ? add(total, term) : term;
  }
  return scale(total, real(-1) / static_cast<real>(n));
}

Var adversarial_kl(Var mu, Var log_sigma) {
  require(!mu.dims().empty() && mu.dims()[0] > 0, "adversarial_kl: empty generated batch");
  return kl_std_normal(mu, log_sigma);
}

Objectives total_losses(const LossTerms& terms, const LossWeights& w, long step) {
  for (Var v : {terms.pred, terms.img, terms.mask, terms.kl, terms.attr, terms.adv})
    require(v.valid() && v.value().size() == 1, "total_losses: every term must be a scalar");
  const real w_kl = w.kl_weight(step);
  const real big = std::numeric_limits<real>::max();
  Var ep = add(add(add(scale(terms.pred, w.w_pred), scale(terms.img, w.w_img)), scale(terms.mask, w.w_mask)),
               add(scale(terms.kl, w_kl), scale(terms.attr, w.w_attr)));
  Var adv_ep = clamp(scale(terms.adv, -w.w_adv), -w.kappa, big);
  Objectives o;
  o.loss_EP = add(ep, adv_ep);
  o.loss_G = add(add(scale(terms.img, w.w_img), scale(terms.mask, w.w_mask)), scale(terms.adv, w.w_adv));
  auto v = [](Var x) { return static_cast<double>(x.value()[0]); };
  o.breakdown = {v(terms.pred), v(terms.img), v(terms.mask), v(terms.kl), v(terms.attr), v(terms.adv),
                 v(o.loss_EP),  v(o.loss_G)};
  return o;
}

}  // namespace aest::inline AEST_PREC
