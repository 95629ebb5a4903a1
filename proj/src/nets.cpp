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

#include "aest/nets.hpp"

#include <algorithm>
#include <cmath>

#include "aest/errors.hpp"

namespace aest::inline AEST_PREC {

char role_code(Role r) {
  switch (r) {
    case Role::E: return 'E';
    case Role::G: return 'G';
    case Role::P: return 'P';
  }
  throw InternalError("role_code: bad role");
}

Role parse_role(char c) {
  if (c == 'E') return Role::E;
  if (c == 'G') return Role::G;
  if (c == 'P') return Role::P;
  throw ContractViolation(std::string("unknown parameter role '") + c + "'");
}

void ModelConfig::validate() const {
  require(embedding_dim >= 1, "model: embedding_dim must be positive");
  require(base_width >= 1 && max_width >= base_width, "model: need 1 <= base_width <= max_width");
  require(predictor_hidden >= 1, "model: predictor_hidden must be positive");
  require(image_channels >= 1, "model: image_channels must be positive");
  require(!ladder.empty() && ladder.front() == 4, "model: ladder must start at 4");
  for (std::size_t i = 1; i < ladder.size(); ++i)
    require(ladder[i] == 2 * ladder[i - 1], "model: ladder must double at every stage");
}

std::size_t ModelConfig::width(std::size_t resolution) const {
  return std::min(max_width, base_width * (full_resolution() / resolution));
}

std::size_t ModelConfig::stage_of(std::size_t resolution) const {
  const auto it = std::find(ladder.begin(), ladder.end(), resolution);
  require(it != ladder.end(), "resolution " + std::to_string(resolution) + " is not in the stage ladder");
  return static_cast<std::size_t>(it - ladder.begin());
}

namespace {

std::string key(const char* prefix, std::size_t stage, const char* suffix) {
  return std::string(prefix) + "." + std::to_string(stage) + "." + suffix;
}

}  // namespace

ParameterSet::ParameterSet(const ModelConfig& model, const AttributeSchema& schema, std::uint64_t seed)
    : model_(model), schema_(schema) {
  model_.validate();
  const std::size_t K = model_.embedding_dim, A = schema_.total_levels(), C = model_.image_channels;
  const std::size_t c4 = model_.width(4);
  auto weight = [&](const std::string& name, Role role, Shape dims, std::size_t stage) {
    add(Parameter{name, role, Tensor(std::move(dims)), true, {}}, stage);
  };
  auto bias = [&](const std::string& name, Role role, std::size_t n, std::size_t stage) {
    add(Parameter{name, role, Tensor({n}), false, {}}, stage);
  };

  for (std::size_t s = 0; s < model_.ladder.size(); ++s) {
    const std::size_t r = model_.ladder[s];
    const std::size_t cin = model_.width(r);
    const std::size_t cout = s == 0 ? c4 : model_.width(model_.ladder[s - 1]);
    weight(key("E.from_rgb", s, "w"), Role::E, {cin, C + A, 1, 1}, s);
    bias(key("E.from_rgb", s, "b"), Role::E, cin, s);
    weight(key("E.block", s, "w"), Role::E, {cout, cin, 3, 3}, s);
    bias(key("E.block", s, "b"), Role::E, cout, s);
    if (cin != cout) weight(key("E.block", s, "proj"), Role::E, {cout, cin, 1, 1}, s);
  }
  weight("E.mu.w", Role::E, {K, c4 * 16}, 0);
  bias("E.mu.b", Role::E, K, 0);
  weight("E.log_sigma.w", Role::E, {K, c4 * 16}, 0);
  bias("E.log_sigma.b", Role::E, K, 0);
  weight("E.attr.w", Role::E, {A, c4 * 16}, 0);
  bias("E.attr.b", Role::E, A, 0);

  weight("G.input.w", Role::G, {c4 * 16, K + A}, 0);
  bias("G.input.b", Role::G, c4 * 16, 0);
  for (std::size_t s = 0; s < model_.ladder.size(); ++s) {
    const std::size_t r = model_.ladder[s];
    const std::size_t cin = s == 0 ? c4 : model_.width(model_.ladder[s - 1]);
    const std::size_t cout = model_.width(r);
    weight(key("G.block", s, "w"), Role::G, {cout, cin + A, 3, 3}, s);
    bias(key("G.block", s, "b"), Role::G, cout, s);
    if (cin != cout) weight(key("G.block", s, "proj"), Role::G, {cout, cin, 1, 1}, s);
    weight(key("G.to_rgb", s, "w"), Role::G, {C + 1, cout, 1, 1}, s);
    bias(key("G.to_rgb", s, "b"), Role::G, C + 1, s);
  }

  weight("P.hidden.w", Role::P, {model_.predictor_hidden, K}, 0);
  bias("P.hidden.b", Role::P, model_.predictor_hidden, 0);
  weight("P.out.w", Role::P, {1, model_.predictor_hidden}, 0);
  bias("P.out.b", Role::P, 1, 0);

  Rng rng(Rng::mix(seed, 0x1417));
  for (std::size_t i = 0; i < params_.size(); ++i) initialize(i, rng);
  // Start the predictor at the scale midpoint.
  params_[index("P.out.b")].value[0] = 3;
}

void ParameterSet::add(Parameter p, std::size_t stage) {
  require(!by_name_.count(p.name), "duplicate parameter " + p.name);
  by_name_[p.name] = params_.size();
  params_.push_back(std::move(p));
  stage_.push_back(stage);
}

void ParameterSet::initialize(std::size_t i, Rng& rng) {
  Parameter& p = params_.at(i);
  if (!p.spectral) {
    p.value.fill(0);
    return;
  }
  const std::size_t fan_in = p.value.size() / p.value.dim(0);
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (real& x : p.value.values()) x = static_cast<real>(rng.uniform(-bound, bound));
  p.sn = SpectralState::random(p.value.dim(0), rng);
}

std::size_t ParameterSet::index(const std::string& name) const {
  const auto it = by_name_.find(name);
  require(it != by_name_.end(), "unknown parameter " + name);
  return it->second;
}

std::vector<std::size_t> ParameterSet::indices(Role role) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (params_[i].role == role) out.push_back(i);
  return out;
}

std::vector<std::size_t> ParameterSet::stage_parameters(std::size_t stage) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < params_.size(); ++i)
    if (stage_[i] == stage) out.push_back(i);
  return out;
}

NetContext::NetContext(Tape& tape, ParameterSet& params, std::vector<Role> trainable, bool update_spectral,
                       int spectral_iters)
    : tape_(tape),
      params_(params),
      trainable_(std::move(trainable)),
      update_spectral_(update_spectral),
      spectral_iters_(spectral_iters) {
  require(spectral_iters >= 0, "NetContext: spectral_iters must be nonnegative");
}

Var NetContext::param(const std::string& name) {
  const std::size_t i = params_.index(name);
  if (auto it = leaves_.find(i); it != leaves_.end()) return it->second;
  const Parameter& p = params_[i];
  const bool trainable = std::find(trainable_.begin(), trainable_.end(), p.role) != trainable_.end();
  Var v = tape_.leaf(p.value, trainable);
  leaves_.emplace(i, v);
  return v;
}

Var NetContext::weight(const std::string& name) {
  const std::size_t i = params_.index(name);
  Parameter& p = params_[i];
  if (!p.spectral) return param(name);
  if (auto it = normalized_.find(i); it != normalized_.end()) return it->second;
  Var w = param(name);
  SpectralResult r;
  if (update_spectral_) {
    r = spectral_normalize(w, p.sn, spectral_iters_);
  } else {
    SpectralState scratch = p.sn;
    r = spectral_normalize(w, scratch, spectral_iters_);
  }
  ++spectral_calls_;
  ++calls_[i];
  normalized_.emplace(i, r.weight);
  return r.weight;
}

std::size_t NetContext::spectral_calls(const std::string& name) const {
  const auto it = calls_.find(params_.index(name));
  return it == calls_.end() ? 0 : it->second;
}

Tensor one_hot_batch(const AttributeSchema& schema, const std::vector<AttributeAssignment>& attrs) {
  const std::size_t A = schema.total_levels();
  Tensor out({attrs.size(), A});
  for (std::size_t n = 0; n < attrs.size(); ++n) {
    const auto row = schema.one_hot(attrs[n]);
    std::copy(row.begin(), row.end(), out.data() + n * A);
  }
  return out;
}

Tensor uniform_attributes(const AttributeSchema& schema, std::size_t n) {
  const std::size_t A = schema.total_levels();
  Tensor out({n, A});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const std::size_t l = schema[c].levels.size();
      for (std::size_t k = 0; k < l; ++k) out[i * A + schema.offset(c) + k] = real(1) / real(l);
    }
  return out;
}

namespace {

Var conv_bias(NetContext& net, Var x, const std::string& w, const std::string& b, int pad) {
  return add_channel_bias(conv2d(x, net.weight(w), 1, pad), net.param(b));
}

Var planes(Var attributes, std::size_t resolution) { return expand_planes(attributes, resolution, resolution); }

Var from_rgb(NetContext& net, Var images, Var attributes, std::size_t s, std::size_t resolution) {
  Var in = concat_axis1({images, planes(attributes, resolution)});
  return leaky_relu(conv_bias(net, in, key("E.from_rgb", s, "w"), key("E.from_rgb", s, "b"), 0), kLeakSlope);
}

// conv3x3 -> spectral norm -> leaky relu -> residual add -> avg_pool2d(2) (except at 4x4).
Var encoder_block(NetContext& net, Var x, std::size_t s) {
  Var f = leaky_relu(conv_bias(net, x, key("E.block", s, "w"), key("E.block", s, "b"), 1), kLeakSlope);
  const std::string proj = key("E.block", s, "proj");
  Var skip = f.dims()[1] != x.dims()[1] ? conv2d(x, net.weight(proj), 1, 0) : x;
  Var y = residual_add(skip, f);
  return s == 0 ? y : avg_pool2d(y, 2);
}

// upsample_nearest(2) (except at 4x4) -> conv3x3 on [x, attribute planes] -> spectral norm -> leaky relu -> residual add.
Var generator_block(NetContext& net, Var x, Var attributes, std::size_t s) {
  if (s > 0) x = upsample_nearest(x, 2);
  Var in = concat_axis1({x, planes(attributes, x.dims()[2])});
  Var f = leaky_relu(conv_bias(net, in, key("G.block", s, "w"), key("G.block", s, "b"), 1), kLeakSlope);
  const std::string proj = key("G.block", s, "proj");
  Var skip = f.dims()[1] != x.dims()[1] ? conv2d(x, net.weight(proj), 1, 0) : x;
  return residual_add(skip, f);
}

Var to_rgb(NetContext& net, Var x, std::size_t s) {
  return sigmoid(conv_bias(net, x, key("G.to_rgb", s, "w"), key("G.to_rgb", s, "b"), 0));
}

void check_stage(const ModelConfig& m, const StageConfig& stage) {
  require(stage.stage < m.ladder.size(), "stage " + std::to_string(stage.stage) + " is outside the ladder");
  require(stage.alpha >= 0 && stage.alpha <= 1, "stage blend alpha must lie in [0,1]");
}

void check_attributes(const AttributeSchema& schema, Var attributes, std::size_t n) {
  require(attributes.dims() == Shape{n, schema.total_levels()},
          "attributes must be [" + std::to_string(n) + "," + std::to_string(schema.total_levels()) + "], got " +
              shape_string(attributes.dims()));
}

}  // namespace

Encoding encode(NetContext& net, Var images, Var attributes, const StageConfig& stage) {
  const ModelConfig& m = net.params().model();
  check_stage(m, stage);
  const std::size_t R = m.ladder[stage.stage];
  const Shape d = images.dims();
  require(d.size() == 4 && d[1] == m.image_channels && d[2] == R && d[3] == R,
          "encode: expected images [N," + std::to_string(m.image_channels) + "," + std::to_string(R) + "," +
              std::to_string(R) + "], got " + shape_string(d));
  const std::size_t N = d[0];
  check_attributes(net.params().schema(), attributes, N);

  std::size_t s = stage.stage;
  Var x = encoder_block(net, from_rgb(net, images, attributes, s, R), s);
  if (s > 0 && stage.alpha < 1) {
    Var old = from_rgb(net, avg_pool2d(images, 2), attributes, s - 1, R / 2);
    x = blend(old, x, stage.alpha);
  }
  while (s > 0) x = encoder_block(net, x, --s);

  Var f = reshape(x, {N, x.value().size() / N});
  Encoding e;
  e.mu = linear(f, net.weight("E.mu.w"), net.param("E.mu.b"));
  e.log_sigma = clamp(linear(f, net.weight("E.log_sigma.w"), net.param("E.log_sigma.b")), kLogSigmaMin, kLogSigmaMax);
  e.logits = linear(f, net.weight("E.attr.w"), net.param("E.attr.b"));
  return e;
}

Generated generate(NetContext& net, Var h, Var attributes, const StageConfig& stage) {
  const ModelConfig& m = net.params().model();
  check_stage(m, stage);
  require(h.dims().size() == 2 && h.dims()[1] == m.embedding_dim,
          "generate: expected embeddings [N," + std::to_string(m.embedding_dim) + "], got " + shape_string(h.dims()));
  const std::size_t N = h.dims()[0];
  check_attributes(net.params().schema(), attributes, N);

  const std::size_t c4 = m.width(4);
  Var z = linear(concat_axis1({h, attributes}), net.weight("G.input.w"), net.param("G.input.b"));
  Var x = generator_block(net, leaky_relu(reshape(z, {N, c4, 4, 4}), kLeakSlope), attributes, 0);
  Var prev = x;
  for (std::size_t s = 1; s <= stage.stage; ++s) {
    prev = x;
    x = generator_block(net, x, attributes, s);
  }
  Var out = to_rgb(net, x, stage.stage);
  if (stage.stage > 0 && stage.alpha < 1)
    out = blend(upsample_nearest(to_rgb(net, prev, stage.stage - 1), 2), out, stage.alpha);
  const std::size_t C = m.image_channels;
  return {slice_axis1(out, 0, C), slice_axis1(out, C, C + 1)};
}

Var predict(NetContext& net, Var h) {
  const ModelConfig& m = net.params().model();
  require(h.dims().size() == 2 && h.dims()[1] == m.embedding_dim,
          "predict: expected embeddings [N," + std::to_string(m.embedding_dim) + "], got " + shape_string(h.dims()));
  Var z = leaky_relu(linear(h, net.weight("P.hidden.w"), net.param("P.hidden.b")), kLeakSlope);
  return linear(z, net.weight("P.out.w"), net.param("P.out.b"));
}

Var reparameterize(Var mu, Var log_sigma, const Tensor& noise) {
  require(mu.dims() == log_sigma.dims() && noise.dims() == mu.dims(),
          "reparameterize: mu, sigma and noise must share a shape, got " + shape_string(mu.dims()) + ", " +
              shape_string(log_sigma.dims()) + ", " + shape_string(noise.dims()));
  return add(mu, mul(exp(log_sigma), mu.tape->constant(noise)));
}

Var gumbel_softmax(Var logits, real tau, const Tensor& gumbel_noise) {
  require(tau > 0, "gumbel_softmax: tau must be positive");
  require(gumbel_noise.dims() == logits.dims(), "gumbel_softmax: noise shape does not match logits");
  return softmax(scale(add(logits, logits.tape->constant(gumbel_noise)), real(1) / tau));
}

Var classify_attributes(const AttributeSchema& schema, Var logits, AttributeMode mode, real tau,
                        const Tensor& gumbel_noise) {
  const Shape d = logits.dims();
  require(d.size() == 2 && d[1] == schema.total_levels(), "classify_attributes: logits must be [N, total levels]");
  if (mode == AttributeMode::hard)
    return logits.tape->constant(one_hot_batch(schema, hard_attributes(schema, logits.value())));
  require(gumbel_noise.dims() == d, "classify_attributes: noise shape does not match logits");
  std::vector<Var> parts;
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const std::size_t b = schema.offset(c), e = b + schema[c].levels.size();
    Tensor noise({d[0], e - b});
    for (std::size_t n = 0; n < d[0]; ++n)
      for (std::size_t k = b; k < e; ++k) noise[n * (e - b) + k - b] = gumbel_noise[n * d[1] + k];
    parts.push_back(gumbel_softmax(slice_axis1(logits, b, e), tau, noise));
  }
  return concat_axis1(parts);
}

std::vector<AttributeAssignment> hard_attributes(const AttributeSchema& schema, const Tensor& logits) {
  const std::size_t N = logits.dim(0), A = logits.dim(1);
  std::vector<AttributeAssignment> out(N, AttributeAssignment(schema.size()));
  for (std::size_t n = 0; n < N; ++n)
    for (std::size_t c = 0; c < schema.size(); ++c) {
      const std::size_t b = schema.offset(c), l = schema[c].levels.size();
      std::size_t best = 0;
      for (std::size_t k = 1; k < l; ++k)
        if (logits[n * A + b + k] > logits[n * A + b + best]) best = k;
      out[n][c] = best;
    }
  return out;
}

}  // namespace aest::inline AEST_PREC
