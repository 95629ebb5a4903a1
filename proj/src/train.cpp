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

#include "aest/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "aest/aest_file.hpp"
#include "aest/errors.hpp"
#include "json.hpp"
#include "json_util.hpp"

namespace aest::inline AEST_PREC {

namespace fs = std::filesystem;
using nlohmann::json;

AdamState make_adam_state(const ParameterSet& params, Role role) {
  AdamState s;
  for (std::size_t i : params.indices(role)) {
    s.m.push_back(Tensor::zeros_like(params[i].value));
    s.v.push_back(Tensor::zeros_like(params[i].value));
  }
  return s;
}

namespace {

// Position of parameter i inside its role's AdamState.
std::size_t adam_slot(const ParameterSet& params, std::size_t i) {
  const auto idx = params.indices(params[i].role);
  return static_cast<std::size_t>(std::lower_bound(idx.begin(), idx.end(), i) - idx.begin());
}

}  // namespace

void adam_step(ParameterSet& params, const std::vector<std::size_t>& indices, const std::vector<Tensor>& grads,
               AdamState& state, const AdamOptions& o, const std::string& term) {
  require(indices.size() == grads.size(), "adam_step: one gradient per parameter");
  for (std::size_t k = 0; k < grads.size(); ++k) {
    require(grads[k].dims() == params[indices[k]].value.dims(),
            "adam_step: gradient shape mismatch for " + params[indices[k]].name);
    if (!grads[k].all_finite())
      throw DivergenceError(term, "non-finite gradient for " + params[indices[k]].name + " from " + term);
  }
  state.t += 1;
  const double c1 = 1 - std::pow(o.b1, static_cast<double>(state.t));
  const double c2 = 1 - std::pow(o.b2, static_cast<double>(state.t));
  for (std::size_t k = 0; k < grads.size(); ++k) {
    Tensor& theta = params[indices[k]].value;
    const std::size_t slot = adam_slot(params, indices[k]);
    require(slot < state.m.size(), "adam_step: parameter does not belong to this optimizer");
    Tensor& m = state.m[slot];
    Tensor& v = state.v[slot];
    const Tensor& g = grads[k];
    for (std::size_t i = 0; i < g.size(); ++i) {
      const double gi = g[i];
      const double mi = o.b1 * m[i] + (1 - o.b1) * gi;
      const double vi = o.b2 * v[i] + (1 - o.b2) * gi * gi;
      m[i] = static_cast<real>(mi);
      v[i] = static_cast<real>(vi);
      const double mhat = mi / c1, vhat = vi / c2;
      theta[i] = static_cast<real>(theta[i] - o.lr * mhat / (std::sqrt(vhat) + o.eps));
    }
  }
}

void TrainConfig::validate() const {
  model.validate();
  weights.validate();
  const std::size_t S = model.ladder.size();
  require(steps_per_stage.size() == S, "steps_per_stage needs one entry per ladder stage");
  for (long n : steps_per_stage) require(n >= 1, "every stage needs at least one step");
  require(rho.size() == S, "rho needs one entry per ladder stage");
  for (int r : rho) require(r >= 2 && r <= 10, "rho must lie in [2,10]");
  require(batch_size >= 1, "batch_size must be positive");
  require(adam.lr >= 0 && adam.b1 >= 0 && adam.b1 < 1 && adam.b2 >= 0 && adam.b2 < 1 && adam.eps > 0,
          "invalid Adam hyperparameters");
  require(rated_fraction >= 0 && rated_fraction <= 1, "rated_fraction must lie in [0,1]");
  require(unknown_attr_fraction >= 0 && unknown_attr_fraction <= 1, "unknown_attr_fraction must lie in [0,1]");
  require(tau_start > 0 && tau_end > 0, "Gumbel temperatures must be positive");
  require(eval_every >= 0, "eval_every must be nonnegative");
}

long TrainConfig::total_steps() const {
  long n = 0;
  for (long s : steps_per_stage) n += s;
  return n;
}

long TrainConfig::stage_start(std::size_t stage) const {
  long n = 0;
  for (std::size_t s = 0; s < stage && s < steps_per_stage.size(); ++s) n += steps_per_stage[s];
  return n;
}

long TrainConfig::kl_anneal_steps() const {
  if (weights.kl_anneal_steps > 0) return weights.kl_anneal_steps;
  return std::max(1L, static_cast<long>(std::llround(0.3 * static_cast<double>(total_steps()))));
}

double TrainConfig::tau(long step) const {
  const long total = total_steps();
  if (total <= 1) return tau_end;
  const double f = std::clamp(static_cast<double>(step) / static_cast<double>(total - 1), 0.0, 1.0);
  return tau_start + (tau_end - tau_start) * f;
}

namespace {

template <class T>
std::vector<T> per_stage(const json& j, const char* key, std::size_t stages, std::vector<T> fallback) {
  if (!j.contains(key)) {
    if (fallback.size() != stages) fallback.assign(stages, fallback.empty() ? T{} : fallback.front());
    return fallback;
  }
  const json& v = j.at(key);
  if (v.is_array()) return v.get<std::vector<T>>();
  return std::vector<T>(stages, v.get<T>());
}

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
  require(j.is_object(), where + " must be an object");
  for (const auto& [k, v] : j.items())
    require(allowed.count(k) > 0, "unknown key '" + k + "' in " + where);
}

}  // namespace

TrainConfig train_config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("train config: invalid JSON at byte offset ") + std::to_string(e.byte));
  }
  try {
    check_keys(j,
               {"model", "steps_per_stage", "rho", "batch_size", "adam", "weights", "seed", "rated_fraction",
                "unknown_attr_fraction", "tau_start", "tau_end", "eval_every"},
               "train config");
    TrainConfig c;
    if (j.contains("model")) {
      const json& m = j.at("model");
      check_keys(m, {"embedding_dim", "base_width", "max_width", "predictor_hidden", "image_channels", "ladder"},
                 "model");
      c.model.embedding_dim = m.value("embedding_dim", c.model.embedding_dim);
      c.model.base_width = m.value("base_width", c.model.base_width);
      c.model.max_width = m.value("max_width", c.model.max_width);
      c.model.predictor_hidden = m.value("predictor_hidden", c.model.predictor_hidden);
      c.model.image_channels = m.value("image_channels", c.model.image_channels);
      c.model.ladder = m.value("ladder", c.model.ladder);
    }
    const std::size_t S = c.model.ladder.size();
    c.steps_per_stage = per_stage<long>(j, "steps_per_stage", S, c.steps_per_stage);
    c.rho = per_stage<int>(j, "rho", S, c.rho);
    c.batch_size = j.value("batch_size", c.batch_size);
    if (j.contains("adam")) {
      const json& a = j.at("adam");
      check_keys(a, {"lr", "b1", "b2", "eps"}, "adam");
      c.adam.lr = a.value("lr", c.adam.lr);
      c.adam.b1 = a.value("b1", c.adam.b1);
      c.adam.b2 = a.value("b2", c.adam.b2);
      c.adam.eps = a.value("eps", c.adam.eps);
    }
    if (j.contains("weights")) {
      const json& w = j.at("weights");
      check_keys(w,
                 {"w_pred", "w_img", "w_mask", "w_kl", "w_attr", "w_adv", "kl_anneal_steps", "kappa",
                  "override_kl_ratio"},
                 "weights");
      LossWeights& lw = c.weights;
      lw.w_pred = w.value("w_pred", lw.w_pred);
      lw.w_img = w.value("w_img", lw.w_img);
      lw.w_mask = w.value("w_mask", lw.w_mask);
      lw.w_kl = w.value("w_kl", lw.w_kl);
      lw.w_attr = w.value("w_attr", lw.w_attr);
      lw.w_adv = w.value("w_adv", lw.w_adv);
      lw.kl_anneal_steps = w.value("kl_anneal_steps", lw.kl_anneal_steps);
      lw.kappa = w.value("kappa", lw.kappa);
      lw.override_kl_ratio = w.value("override_kl_ratio", lw.override_kl_ratio);
    }
    c.seed = j.value("seed", c.seed);
    c.rated_fraction = j.value("rated_fraction", c.rated_fraction);
    c.unknown_attr_fraction = j.value("unknown_attr_fraction", c.unknown_attr_fraction);
    c.tau_start = j.value("tau_start", c.tau_start);
    c.tau_end = j.value("tau_end", c.tau_end);
    c.eval_every = j.value("eval_every", c.eval_every);
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw FormatError(std::string("train config: ") + e.what());
  } catch (const ContractViolation& e) {
    throw FormatError(std::string("train config: ") + e.what());
  }
}

namespace {

json config_json(const TrainConfig& c) {
  const LossWeights& w = c.weights;
  return {{"model",
           {{"embedding_dim", c.model.embedding_dim},
            {"base_width", c.model.base_width},
            {"max_width", c.model.max_width},
            {"predictor_hidden", c.model.predictor_hidden},
            {"image_channels", c.model.image_channels},
            {"ladder", c.model.ladder}}},
          {"steps_per_stage", c.steps_per_stage},
          {"rho", c.rho},
          {"batch_size", c.batch_size},
          {"adam", {{"lr", c.adam.lr}, {"b1", c.adam.b1}, {"b2", c.adam.b2}, {"eps", c.adam.eps}}},
          {"weights",
           {{"w_pred", w.w_pred},
            {"w_img", w.w_img},
            {"w_mask", w.w_mask},
            {"w_kl", w.w_kl},
            {"w_attr", w.w_attr},
            {"w_adv", w.w_adv},
            {"kl_anneal_steps", w.kl_anneal_steps},
            {"kappa", w.kappa},
            {"override_kl_ratio", w.override_kl_ratio}}},
          {"seed", c.seed},
          {"rated_fraction", c.rated_fraction},
          {"unknown_attr_fraction", c.unknown_attr_fraction},
          {"tau_start", c.tau_start},
          {"tau_end", c.tau_end},
          {"eval_every", c.eval_every}};
}

std::string read_text(const fs::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

std::string train_config_to_json(const TrainConfig& cfg) { return config_json(cfg).dump(2); }

TrainConfig load_train_config(const fs::path& path) {
  try {
    return train_config_from_json(read_text(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

Schedule progressive_schedule(long step, const TrainConfig& cfg) {
  require(step >= 0 && step < cfg.total_steps(), "progressive_schedule: step outside the run");
  Schedule s;
  long begin = 0;
  s.stage = cfg.steps_per_stage.size() - 1;
  for (std::size_t i = 0; i < cfg.steps_per_stage.size(); ++i) {
    if (step < begin + cfg.steps_per_stage[i]) {
      s.stage = i;
      break;
    }
    begin += cfg.steps_per_stage[i];
  }
  if (s.stage > 0 && step >= cfg.stage_start(s.stage)) begin = cfg.stage_start(s.stage);
  s.resolution = cfg.model.ladder[s.stage];
  if (s.stage == 0) {
    s.alpha = 1;
  } else {
    const double within = static_cast<double>(step - begin);
    s.alpha = static_cast<real>(std::min(1.0, 2.0 * within / static_cast<double>(cfg.steps_per_stage[s.stage])));
  }
  return s;
}

bool is_generator_step(long step, const TrainConfig& cfg) {
  const int rho = cfg.rho[progressive_schedule(step, cfg).stage];
  return step % (rho + 1) < rho;
}

AdamState& TrainState::adam(Role r) {
  switch (r) {
    case Role::E: return adam_E;
    case Role::G: return adam_G;
    case Role::P: return adam_P;
  }
  throw InternalError("TrainState::adam: bad role");
}

TrainState init_train_state(const TrainConfig& cfg, const AttributeSchema& schema) {
  cfg.validate();
  TrainState st;
  st.params = ParameterSet(cfg.model, schema, cfg.seed);
  st.adam_E = make_adam_state(st.params, Role::E);
  st.adam_G = make_adam_state(st.params, Role::G);
  st.adam_P = make_adam_state(st.params, Role::P);
  st.rng = Rng(Rng::mix(cfg.seed, 0x7EA1));
  st.step = 0;
  return st;
}

StagedData::StagedData(const Dataset& ds, const ModelConfig& model)
    : ladder_(model.ladder), channels_(model.image_channels) {
  images_.resize(ladder_.size());
  masks_.resize(ladder_.size());
  const std::size_t full = model.full_resolution();
  for (const auto& s : ds.samples) {
    require(s.image.rank() == 3 && s.image.dim(1) == full && s.image.dim(2) == full,
            "sample " + s.id + " is " + shape_string(s.image.dims()) + ", model expects " + std::to_string(full) +
                "x" + std::to_string(full));
    require(s.image.dim(0) == 1 || s.image.dim(0) == channels_,
            "sample " + s.id + " has " + std::to_string(s.image.dim(0)) + " channels");
    // Grayscale images are broadcast to the model's channels.
    Tensor img({channels_, full, full});
    const std::size_t plane = full * full;
    for (std::size_t c = 0; c < channels_; ++c)
      std::copy_n(s.image.data() + (s.image.dim(0) == 1 ? 0 : c) * plane, plane, img.data() + c * plane);
    Tensor mask = s.mask;
    std::vector<Tensor> imgs(ladder_.size()), msks(ladder_.size());
    for (std::size_t st = ladder_.size(); st-- > 0;) {
      imgs[st] = img;
      msks[st] = mask;
      if (st > 0) {
        img = avg_pool2d(img, 2);
        mask = avg_pool2d(mask, 2);
      }
    }
    for (std::size_t st = 0; st < ladder_.size(); ++st) {
      images_[st].push_back(std::move(imgs[st]));
      masks_[st].push_back(std::move(msks[st]));
    }
    (s.rated() ? rated_ : unrated_).push_back(ids_.size());
    ids_.push_back(s.id);
    ratings_.push_back(s.rating);
    attrs_.push_back(s.attributes);
  }
}

namespace {

Tensor stack(const std::vector<Tensor>& pool, const std::vector<std::size_t>& rows) {
  require(!rows.empty(), "stack: no rows");
  Shape d = pool.at(rows[0]).dims();
  const std::size_t each = pool[rows[0]].size();
  d.insert(d.begin(), rows.size());
  Tensor out(d);
  for (std::size_t i = 0; i < rows.size(); ++i) std::copy_n(pool.at(rows[i]).data(), each, out.data() + i * each);
  return out;
}

std::size_t stage_index(const std::vector<std::size_t>& ladder, std::size_t resolution) {
  const auto it = std::find(ladder.begin(), ladder.end(), resolution);
  require(it != ladder.end(), "resolution " + std::to_string(resolution) + " is not in the ladder");
  return static_cast<std::size_t>(it - ladder.begin());
}

// Draws `count` rows from `pool`, without replacement inside each pass over the pool.
std::vector<std::size_t> draw_rows(const std::vector<std::size_t>& pool, std::size_t count, Rng& rng) {
  std::vector<std::size_t> out;
  if (pool.empty()) return out;
  std::vector<std::size_t> perm;
  while (out.size() < count) {
    perm = pool;
    const std::size_t take = std::min(count - out.size(), perm.size());
    for (std::size_t i = 0; i < take; ++i) {
      std::swap(perm[i], perm[i + rng.index(perm.size() - i)]);
      out.push_back(perm[i]);
    }
  }
  return out;
}

const char* kTermNames[] = {"pred_l1", "img_l1", "mask_l1", "kl_prior", "attr_ce", "adv_kl_gen"};

std::string first_nonfinite(const LossBreakdown& b) {
  const double v[] = {b.pred_l1, b.img_l1, b.mask_l1, b.kl_prior, b.attr_ce, b.adv_kl_gen};
  for (int i = 0; i < 6; ++i)
    if (!std::isfinite(v[i])) return kTermNames[i];
  return {};
}

}  // namespace

Tensor StagedData::images(const std::vector<std::size_t>& rows, std::size_t resolution) const {
  return stack(images_[stage_index(ladder_, resolution)], rows);
}

Tensor StagedData::masks(const std::vector<std::size_t>& rows, std::size_t resolution) const {
  return stack(masks_[stage_index(ladder_, resolution)], rows);
}

StepResult train_step(const StagedData& data, TrainState& st, const TrainConfig& cfg) {
  const long step = st.step;
  const ParameterSet& ps = st.params;
  const AttributeSchema& schema = ps.schema();
  const std::size_t K = ps.model().embedding_dim, A = schema.total_levels();
  StepResult out;
  out.schedule = progressive_schedule(step, cfg);
  out.generator_step = is_generator_step(step, cfg);
  const std::size_t R = out.schedule.resolution;

  // New-resolution blocks start from a fresh initialization when their stage begins.
  if (out.schedule.stage > 0 && step == cfg.stage_start(out.schedule.stage)) {
    for (std::size_t i : st.params.stage_parameters(out.schedule.stage)) {
      st.params.initialize(i, st.rng);
      AdamState& a = st.adam(st.params[i].role);
      const std::size_t slot = adam_slot(st.params, i);
      a.m[slot].fill(0);
      a.v[slot].fill(0);
    }
  }

  // Batch and noise draws, in a fixed order so the stream is independent of the step type.
  const std::size_t B = cfg.batch_size;
  std::size_t n_rated = 0;
  if (!data.rated().empty())
    n_rated = data.unrated().empty() ? B : static_cast<std::size_t>(std::lround(cfg.rated_fraction * double(B)));
  require(n_rated == B || !data.unrated().empty(), "train_step: no unrated samples to fill the batch");
  std::vector<std::size_t> rows = draw_rows(data.rated(), n_rated, st.rng);
  for (std::size_t r : draw_rows(data.unrated(), B - n_rated, st.rng)) rows.push_back(r);

  std::vector<AttributeAssignment> attrs;
  std::vector<std::optional<real>> ratings;
  for (std::size_t r : rows) {
    attrs.push_back(data.attributes()[r]);
    ratings.push_back(data.ratings()[r]);
  }
  const Tensor known = one_hot_batch(schema, attrs);
  const Tensor uniform = uniform_attributes(schema, B);
  Tensor enc_attrs = known, unknown_rows({B, A}), known_part = known;
  for (std::size_t n = 0; n < B; ++n)
    if (st.rng.uniform() < cfg.unknown_attr_fraction)
      for (std::size_t k = 0; k < A; ++k) {
        enc_attrs[n * A + k] = uniform[n * A + k];
        unknown_rows[n * A + k] = 1;
        known_part[n * A + k] = 0;
      }
  Tensor noise({B, K}), gumbel({B, A}), prior({B, K});
  for (real& x : noise.values()) x = static_cast<real>(st.rng.normal());
  for (real& x : gumbel.values()) x = static_cast<real>(st.rng.gumbel());
  for (real& x : prior.values()) x = static_cast<real>(st.rng.normal());
  std::vector<AttributeAssignment> prior_attrs(B, AttributeAssignment(schema.size()));
  for (auto& a : prior_attrs)
    for (std::size_t c = 0; c < schema.size(); ++c) a[c] = st.rng.index(schema[c].levels.size());

  const std::vector<Role> trainable =
      out.generator_step ? std::vector<Role>{Role::G} : std::vector<Role>{Role::E, Role::P};
  Tape tape;
  NetContext net(tape, st.params, trainable);
  const StageConfig stage{out.schedule.stage, out.schedule.alpha};

  Var x = tape.constant(data.images(rows, R));
  Var m = tape.constant(data.masks(rows, R));
  Encoding e = encode(net, x, tape.constant(enc_attrs), stage);
  Var h = reparameterize(e.mu, e.log_sigma, noise);
  Var soft = classify_attributes(schema, e.logits, AttributeMode::soft, static_cast<real>(cfg.tau(step)), gumbel);
  Var gen_attrs = add(mul(soft, tape.constant(unknown_rows)), tape.constant(known_part));
  Generated g = generate(net, h, gen_attrs, stage);
  Var y_hat = predict(net, h);

  Var prior_onehot = tape.constant(one_hot_batch(schema, prior_attrs));
  Generated fake = generate(net, tape.constant(prior), prior_onehot, stage);
  Encoding fe = encode(net, fake.image, prior_onehot, stage);

  LossTerms terms;
  terms.pred = predictive_loss(y_hat, ratings);
  const Reconstruction rec = reconstruction_loss(x, g.image, m, g.mask);
  terms.img = rec.img_l1;
  terms.mask = rec.mask_l1;
  terms.kl = kl_std_normal(e.mu, e.log_sigma);
  terms.attr = attribute_cross_entropy(schema, e.logits, known);
  terms.adv = adversarial_kl(fe.mu, fe.log_sigma);
  LossWeights w = cfg.weights;
  w.kl_anneal_steps = cfg.kl_anneal_steps();
  const Objectives obj = total_losses(terms, w, step);
  out.losses = obj.breakdown;
  st.step += 1;

  if (std::string bad = first_nonfinite(out.losses); !bad.empty()) {
    out.finite = false;
    out.divergent_term = bad;
    return out;
  }

  std::vector<std::size_t> idx;
  std::vector<Var> wrt;
  for (const auto& [i, v] : net.leaves())
    if (std::find(trainable.begin(), trainable.end(), ps[i].role) != trainable.end()) {
      idx.push_back(i);
      wrt.push_back(v);
    }
  const std::string loss_name = out.generator_step ? "loss_G" : "loss_EP";
  const std::vector<Tensor> grads = tape.gradient(out.generator_step ? obj.loss_G : obj.loss_EP, wrt);
  for (const Tensor& gr : grads)
    if (!gr.all_finite()) {
      out.finite = false;
      out.divergent_term = loss_name;
      return out;
    }
  for (Role role : trainable) {
    std::vector<std::size_t> ri;
    std::vector<Tensor> rg;
    for (std::size_t k = 0; k < idx.size(); ++k)
      if (ps[idx[k]].role == role) {
        ri.push_back(idx[k]);
        rg.push_back(grads[k]);
      }
    adam_step(st.params, ri, rg, st.adam(role), cfg.adam, loss_name);
  }
  return out;
}

std::string metric_json(const MetricRecord& r) {
  json j = {{"step", r.step},
            {"stage", r.stage},
            {"alpha", r.alpha},
            {"pred_l1", r.losses.pred_l1},
            {"img_l1", r.losses.img_l1},
            {"mask_l1", r.losses.mask_l1},
            {"kl_prior", r.losses.kl_prior},
            {"attr_ce", r.losses.attr_ce},
            {"adv_kl_gen", r.losses.adv_kl_gen}};
  if (r.val_mae) j["val_mae"] = *r.val_mae;
  return j.dump();
}

double validation_mae(const StagedData& data, ParameterSet& params, const Schedule& schedule) {
  const auto& rated = data.rated();
  require(!rated.empty(), "validation_mae: no rated samples");
  const AttributeSchema& schema = params.schema();
  double total = 0;
  constexpr std::size_t kChunk = 64;
  for (std::size_t b = 0; b < rated.size(); b += kChunk) {
    const std::vector<std::size_t> rows(rated.begin() + b, rated.begin() + std::min(rated.size(), b + kChunk));
    std::vector<AttributeAssignment> attrs;
    for (std::size_t r : rows) attrs.push_back(data.attributes()[r]);
    Tape tape;
    NetContext net(tape, params, {}, false);
    Encoding e = encode(net, tape.constant(data.images(rows, schedule.resolution)),
                        tape.constant(one_hot_batch(schema, attrs)), {schedule.stage, schedule.alpha});
    const Tensor& y = predict(net, e.mu).value();
    for (std::size_t i = 0; i < rows.size(); ++i)
      total += std::abs(std::clamp(double(y[i]), 1.0, 5.0) - double(*data.ratings()[rows[i]]));
  }
  return total / static_cast<double>(rated.size());
}

void fit(const Dataset& ds, const TrainConfig& cfg, TrainState& st, const FitOptions& options) {
  cfg.validate();
  require(st.params.schema() == ds.schema, "fit: dataset schema differs from the model's");
  const Dataset train_ds = ds.subset(Split::train), val_ds = ds.subset(Split::val);
  require(!train_ds.samples.empty(), "fit: dataset has no samples tagged 'train'");
  const StagedData train(train_ds, cfg.model);
  const StagedData val(val_ds, cfg.model);
  const long total = cfg.total_steps();
  const long epoch =
      cfg.eval_every > 0 ? cfg.eval_every
                         : std::max<long>(1, static_cast<long>((train.size() + cfg.batch_size - 1) / cfg.batch_size));
  int nonfinite_run = 0;
  while (st.step < total && (options.stop_at < 0 || st.step < options.stop_at)) {
    const StepResult r = train_step(train, st, cfg);
    const long done = st.step;
    MetricRecord rec{done - 1, r.schedule.stage, double(r.schedule.alpha), r.losses, std::nullopt};
    if ((done % epoch == 0 || done == total) && !val.rated().empty())
      rec.val_mae = validation_mae(val, st.params, r.schedule);
    if (options.metrics) *options.metrics << metric_json(rec) << '\n';
    if (options.on_step) options.on_step(rec);
    if (!r.finite) {
      if (++nonfinite_run >= 10)
        throw DivergenceError(r.divergent_term, "training diverged: '" + r.divergent_term +
                                                    "' was non-finite for 10 consecutive steps (last step " +
                                                    std::to_string(done - 1) + ")");
    } else {
      nonfinite_run = 0;
    }
    if (options.out_dir) {
      const std::size_t s = r.schedule.stage;
      if (done == cfg.stage_start(s + 1) || done == total)
        save_checkpoint(*options.out_dir / "stages" / ("stage-" + std::to_string(s)), st, cfg);
    }
  }
  if (options.metrics) options.metrics->flush();
  if (options.out_dir && st.step == total) save_checkpoint(*options.out_dir / "checkpoint", st, cfg);
}

namespace {

constexpr int kCheckpointVersion = 1;

std::string checkpoint_id(const TrainState& st) {
  std::uint64_t h = 1469598103934665603ULL;
  auto eat = [&](const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= 1099511628211ULL;
    }
  };
  for (std::size_t i = 0; i < st.params.size(); ++i) {
    for (real x : st.params[i].value.values()) {
      const float f = static_cast<float>(x);
      eat(&f, sizeof f);
    }
  }
  eat(&st.step, sizeof st.step);
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

std::string tensor_file(const std::string& name, const char* kind) { return "tensors/" + name + "." + kind + ".aest"; }

}  // namespace

void save_checkpoint(const fs::path& dir, const TrainState& st, const TrainConfig& cfg) {
  fs::create_directories(dir / "tensors");
  json params = json::array();
  for (std::size_t i = 0; i < st.params.size(); ++i) {
    const Parameter& p = st.params[i];
    json rec = {{"name", p.name}, {"role", std::string(1, role_code(p.role))}, {"value", tensor_file(p.name, "value")}};
    write_tensor(dir / tensor_file(p.name, "value"), p.value);
    if (p.spectral) {
      rec["spectral_u"] = tensor_file(p.name, "u");
      write_tensor(dir / tensor_file(p.name, "u"), Tensor({p.sn.u.size()}, p.sn.u));
    }
    const AdamState& a = const_cast<TrainState&>(st).adam(p.role);
    const std::size_t slot = adam_slot(st.params, i);
    rec["adam_m"] = tensor_file(p.name, "m");
    rec["adam_v"] = tensor_file(p.name, "v");
    write_tensor(dir / tensor_file(p.name, "m"), a.m[slot]);
    write_tensor(dir / tensor_file(p.name, "v"), a.v[slot]);
    params.push_back(rec);
  }
  const Schedule sch = progressive_schedule(std::min(st.step, cfg.total_steps() - 1), cfg);
  json j = {{"format", "aest-checkpoint"},
            {"version", kCheckpointVersion},
            {"id", checkpoint_id(st)},
            {"step", st.step},
            {"stage", sch.stage},
            {"resolution", sch.resolution},
            {"alpha", sch.alpha},
            {"config", config_json(cfg)},
            {"schema", schema_json(st.params.schema())},
            {"rng_state", st.rng.state()},
            {"adam_t", {{"E", st.adam_E.t}, {"G", st.adam_G.t}, {"P", st.adam_P.t}}},
            {"parameters", params}};
  const fs::path tmp = dir / "checkpoint.json.tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw FormatError("cannot write " + tmp.string());
    f << j.dump(2) << '\n';
  }
  fs::rename(tmp, dir / "checkpoint.json");
}

Checkpoint load_checkpoint(const fs::path& dir) {
  const fs::path path = dir / "checkpoint.json";
  const std::string text = read_text(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(path.string() + ": invalid JSON at byte offset " + std::to_string(e.byte));
  }
  try {
    if (j.at("format") != "aest-checkpoint") throw FormatError(path.string() + ": not an aest checkpoint");
    const int version = j.at("version").get<int>();
    if (version != kCheckpointVersion)
      throw FormatError(path.string() + ": checkpoint version " + std::to_string(version) + " is not supported (expected " +
                        std::to_string(kCheckpointVersion) + ")");
    Checkpoint ck;
    ck.config = train_config_from_json(j.at("config").dump());
    ck.state = init_train_state(ck.config, schema_from_json(j.at("schema")));
    TrainState& st = ck.state;
    const json& plist = j.at("parameters");
    if (plist.size() != st.params.size())
      throw FormatError(path.string() + ": expected " + std::to_string(st.params.size()) + " parameters, found " +
                        std::to_string(plist.size()));
    for (const json& rec : plist) {
      const std::size_t i = st.params.index(rec.at("name").get<std::string>());
      Parameter& p = st.params[i];
      if (rec.at("role").get<std::string>() != std::string(1, role_code(p.role)))
        throw FormatError(path.string() + ": role mismatch for " + p.name);
      auto load = [&](const char* key, const Shape& dims) {
        Tensor t = read_tensor(dir / rec.at(key).get<std::string>());
        if (t.dims() != dims)
          throw FormatError(path.string() + ": " + p.name + " " + key + " has shape " + shape_string(t.dims()) +
                            ", expected " + shape_string(dims));
        return t;
      };
      p.value = load("value", p.value.dims());
      if (p.spectral) {
        const Tensor u = load("spectral_u", {p.sn.u.size()});
        p.sn.u.assign(u.values().begin(), u.values().end());
      }
      AdamState& a = st.adam(p.role);
      const std::size_t slot = adam_slot(st.params, i);
      a.m[slot] = load("adam_m", p.value.dims());
      a.v[slot] = load("adam_v", p.value.dims());
    }
    st.adam_E.t = j.at("adam_t").at("E").get<long>();
    st.adam_G.t = j.at("adam_t").at("G").get<long>();
    st.adam_P.t = j.at("adam_t").at("P").get<long>();
    st.rng.set_state(j.at("rng_state").get<std::string>());
    st.step = j.at("step").get<long>();
    ck.id = j.at("id").get<std::string>();
    return ck;
  } catch (const json::exception& e) {
    throw FormatError(path.string() + ": malformed checkpoint (" + e.what() + ")");
  } catch (const ContractViolation& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace aest::inline AEST_PREC
