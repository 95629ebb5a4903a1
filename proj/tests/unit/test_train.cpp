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

#include <unistd.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aest/aest_file.hpp"
#include "aest/errors.hpp"
#include "aest/ops.hpp"
#include "aest/train.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support/toy.hpp"

using namespace aest;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& tag) {
    path = fs::temp_directory_path() / ("aest-test-" + tag + "-" + std::to_string(::getpid()));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

bool same_tensor(const Tensor& a, const Tensor& b) { return a.dims() == b.dims() && std::ranges::equal(a.values(), b.values()); }

bool same_role_values(const ParameterSet& a, const ParameterSet& b, Role role) {
  for (std::size_t i : a.indices(role))
    if (!same_tensor(a[i].value, b[i].value)) return false;
  return true;
}

bool same_adam(const AdamState& a, const AdamState& b) {
  if (a.t != b.t || a.m.size() != b.m.size()) return false;
  for (std::size_t i = 0; i < a.m.size(); ++i)
    if (!same_tensor(a.m[i], b.m[i]) || !same_tensor(a.v[i], b.v[i])) return false;
  return true;
}

bool same_state(const TrainState& a, const TrainState& b) {
  if (a.step != b.step || a.rng.state() != b.rng.state() || a.params.size() != b.params.size()) return false;
  for (std::size_t i = 0; i < a.params.size(); ++i)
    if (!same_tensor(a.params[i].value, b.params[i].value) || !(a.params[i].sn == b.params[i].sn)) return false;
  return same_adam(a.adam_E, b.adam_E) && same_adam(a.adam_G, b.adam_G) && same_adam(a.adam_P, b.adam_P);
}

std::vector<LossBreakdown> run_steps(const StagedData& data, TrainState& st, const TrainConfig& cfg, int n) {
  std::vector<LossBreakdown> out;
  for (int i = 0; i < n; ++i) out.push_back(train_step(data, st, cfg).losses);
  return out;
}

// A parameter of the predictor with its value zeroed.
std::size_t zeroed_parameter(ParameterSet& ps) {
  const std::size_t i = ps.indices(Role::P).front();
  ps[i].value.fill(0);
  return i;
}

}  // namespace

TEST_CASE("adam: closed-form examples") {
  const AttributeSchema schema = AttributeSchema::default_schema();
  const TrainConfig cfg = toy::toy_config();
  ParameterSet ps(cfg.model, schema, 1);
  const std::size_t i = zeroed_parameter(ps);
  const Tensor before = ps[i].value;

  AdamState st = make_adam_state(ps, Role::P);
  adam_step(ps, {i}, {Tensor::zeros_like(before)}, st, AdamOptions{1e-3});
  CHECK(same_tensor(ps[i].value, before));

  Tensor g = Tensor::zeros_like(before);
  g.fill(real(0.1));
  AdamState st0 = make_adam_state(ps, Role::P);
  adam_step(ps, {i}, {g}, st0, AdamOptions{0});
  CHECK(same_tensor(ps[i].value, before));

  AdamState st1 = make_adam_state(ps, Role::P);
  adam_step(ps, {i}, {g}, st1, AdamOptions{1e-3});
  CHECK(st1.t == 1);
  for (real v : ps[i].value.values()) CHECK(double(v) == doctest::Approx(-1e-3 * 0.1 / (0.1 + 1e-8)).epsilon(1e-6));
}

TEST_CASE("adam: a non-finite gradient aborts before any update and names the term") {
  const TrainConfig cfg = toy::toy_config();
  ParameterSet ps(cfg.model, AttributeSchema::default_schema(), 1);
  const auto idx = ps.indices(Role::P);
  std::vector<Tensor> grads;
  for (std::size_t i : idx) grads.push_back(Tensor::zeros_like(ps[i].value));
  for (Tensor& g : grads) g.fill(1);
  grads.back()[0] = std::numeric_limits<real>::quiet_NaN();
  const ParameterSet before = ps;
  AdamState st = make_adam_state(ps, Role::P);
  try {
    adam_step(ps, idx, grads, st, {}, "loss_EP");
    FAIL("expected DivergenceError");
  } catch (const DivergenceError& e) {
    CHECK(e.term() == "loss_EP");
  }
  CHECK(same_role_values(ps, before, Role::P));
  CHECK(st.t == 0);
}

TEST_CASE("update ratio: rho generator steps per encoder/predictor step") {
  TrainConfig cfg = toy::small_config({10, 10});
  cfg.rho = {4, 4};
  int gen = 0;
  for (long s = 0; s < 10; ++s) gen += is_generator_step(s, cfg);
  CHECK(gen == 8);
  for (int rho = 2; rho <= 10; ++rho) {
    TrainConfig c = toy::small_config({1000, 1000});
    c.rho = {rho, rho};
    for (long start : {0L, 7L, 333L}) {
      const long window = 3 * (rho + 1);
      long g = 0;
      for (long s = start; s < start + window; ++s) g += is_generator_step(s, c);
      CHECK(g == 3L * rho);
    }
  }
}

TEST_CASE("progressive schedule examples") {
  TrainConfig cfg = toy::small_config({100, 100, 100});
  cfg.model.ladder = {4, 8, 16};
  const Schedule s0 = progressive_schedule(0, cfg);
  CHECK(s0.stage == 0);
  CHECK(s0.resolution == 4);
  CHECK(s0.alpha == 1);
  const Schedule s2 = progressive_schedule(200, cfg);
  CHECK(s2.stage == 2);
  CHECK(s2.resolution == 16);
  CHECK(s2.alpha == 0);
  CHECK(progressive_schedule(125, cfg).alpha == doctest::Approx(0.5));
  for (long s = 150; s < 200; ++s) CHECK(progressive_schedule(s, cfg).alpha == 1);
  CHECK(progressive_schedule(299, cfg).stage == 2);
  CHECK_THROWS_AS(progressive_schedule(300, cfg), ContractViolation);
}

TEST_CASE("train config json round trip and validation") {
  TrainConfig cfg = toy::small_config({30, 40});
  cfg.rho = {2, 10};
  cfg.weights.w_adv = real(0.25);
  const TrainConfig back = train_config_from_json(train_config_to_json(cfg));
  CHECK(train_config_to_json(back) == train_config_to_json(cfg));
  CHECK(back.rho == cfg.rho);
  CHECK(back.steps_per_stage == cfg.steps_per_stage);

  const TrainConfig scalar = train_config_from_json(R"({"rho": 3, "steps_per_stage": 10})");
  CHECK(scalar.rho == std::vector<int>(4, 3));
  CHECK(scalar.steps_per_stage == std::vector<long>(4, 10));
  CHECK_THROWS_AS(train_config_from_json(R"({"rho": 1})"), FormatError);
  CHECK_THROWS_AS(train_config_from_json(R"({"rho": 11})"), FormatError);
  CHECK_THROWS_AS(train_config_from_json(R"({"learning_rate": 1})"), FormatError);
  CHECK_THROWS_AS(train_config_from_json("{"), FormatError);
}

TEST_CASE("ownership: each step type changes only its own roles") {
  const Dataset ds = toy::small_dataset();
  const TrainConfig cfg = toy::small_config();
  const StagedData data(ds.subset(Split::train), cfg.model);
  TrainState st = init_train_state(cfg, ds.schema);
  int gen = 0, ep = 0;
  for (int k = 0; k < 10; ++k) {
    const ParameterSet before = st.params;
    const bool g = is_generator_step(st.step, cfg);
    train_step(data, st, cfg);
    if (g) {
      ++gen;
      CHECK(same_role_values(st.params, before, Role::E));
      CHECK(same_role_values(st.params, before, Role::P));
      CHECK_FALSE(same_role_values(st.params, before, Role::G));
    } else {
      ++ep;
      CHECK(same_role_values(st.params, before, Role::G));
      CHECK_FALSE(same_role_values(st.params, before, Role::E));
      CHECK_FALSE(same_role_values(st.params, before, Role::P));
    }
  }
  CHECK(gen == 8);
  CHECK(ep == 2);
}

TEST_CASE("determinism: identical seeds give bitwise-identical losses for 50 steps") {
  const Dataset ds = toy::small_dataset();
  const TrainConfig cfg = toy::small_config();
  const StagedData data(ds.subset(Split::train), cfg.model);
  TrainState a = init_train_state(cfg, ds.schema), b = init_train_state(cfg, ds.schema);
  const auto la = run_steps(data, a, cfg, 50), lb = run_steps(data, b, cfg, 50);
  CHECK(la == lb);
  CHECK(same_state(a, b));

  TrainConfig other = cfg;
  other.seed = 1;
  TrainState c = init_train_state(other, ds.schema);
  CHECK(run_steps(data, c, other, 50) != la);
}

TEST_CASE("fit: 100-step smoke run at ladder (4, 8) with metrics and checkpoints") {
  const Dataset ds = toy::small_dataset();
  const TrainConfig cfg = toy::small_config();
  TempDir dir("smoke");
  std::ostringstream metrics;
  TrainState st = init_train_state(cfg, ds.schema);
  FitOptions fo;
  fo.out_dir = dir.path;
  fo.metrics = &metrics;
  fit(ds, cfg, st, fo);
  CHECK(st.step == 100);

  std::istringstream in(metrics.str());
  std::string line;
  long n = 0, with_val = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j.at("step").get<long>() == n);
    CHECK(j.at("stage").get<int>() == (n < 50 ? 0 : 1));
    for (const char* k : {"alpha", "pred_l1", "img_l1", "mask_l1", "kl_prior", "attr_ce", "adv_kl_gen"})
      CHECK(std::isfinite(j.at(k).get<double>()));
    if (j.contains("val_mae")) ++with_val;
    ++n;
  }
  CHECK(n == 100);
  CHECK(with_val == 4);
  CHECK(fs::exists(dir.path / "stages" / "stage-0" / "checkpoint.json"));
  CHECK(fs::exists(dir.path / "stages" / "stage-1" / "checkpoint.json"));
  CHECK(fs::exists(dir.path / "checkpoint" / "checkpoint.json"));
  CHECK(load_checkpoint(dir.path / "stages" / "stage-0").state.step == 50);
}

TEST_CASE("fit: validation MAE ends below that of the untrained model") {
  const Dataset ds = toy::dataset(8, 120, 240);
  TrainConfig cfg = toy::small_config({150, 600});
  cfg.rho = {2, 2};
  cfg.batch_size = 16;
  cfg.adam.lr = 1e-3;
  cfg.rated_fraction = 0.5;
  cfg.weights.w_pred = 5;
  const StagedData val(ds.subset(Split::val), cfg.model);
  TrainState st = init_train_state(cfg, ds.schema);
  const Schedule last = progressive_schedule(cfg.total_steps() - 1, cfg);
  const double untrained = validation_mae(val, st.params, last);
  fit(ds, cfg, st);
  const double trained = validation_mae(val, st.params, last);
  INFO("untrained " << untrained << " trained " << trained);
  CHECK(trained < untrained);
}

TEST_CASE("checkpoint: bitwise round trip") {
  const Dataset ds = toy::small_dataset();
  const TrainConfig cfg = toy::small_config();
  const StagedData data(ds.subset(Split::train), cfg.model);
  TrainState st = init_train_state(cfg, ds.schema);
  run_steps(data, st, cfg, 13);
  TempDir dir("roundtrip");
  save_checkpoint(dir.path, st, cfg);
  const Checkpoint ck = load_checkpoint(dir.path);
  CHECK(same_state(ck.state, st));
  CHECK(train_config_to_json(ck.config) == train_config_to_json(cfg));
  CHECK(ck.state.params.schema() == ds.schema);
  CHECK(ck.id.size() == 16);
  save_checkpoint(dir.path / "again", ck.state, ck.config);
  CHECK(load_checkpoint(dir.path / "again").id == ck.id);
}

TEST_CASE("checkpoint: truncated, missing and future-version files are rejected") {
  const Dataset ds = toy::small_dataset();
  const TrainConfig cfg = toy::small_config();
  const TrainState st = init_train_state(cfg, ds.schema);
  TempDir dir("corrupt");

  save_checkpoint(dir.path / "tensor", st, cfg);
  const fs::path victim = dir.path / "tensor" / "tensors" / (st.params[0].name + ".value.aest");
  fs::resize_file(victim, fs::file_size(victim) - 3);
  CHECK_THROWS_AS(load_checkpoint(dir.path / "tensor"), FormatError);

  save_checkpoint(dir.path / "json", st, cfg);
  const fs::path meta = dir.path / "json" / "checkpoint.json";
  fs::resize_file(meta, fs::file_size(meta) / 2);
  CHECK_THROWS_AS(load_checkpoint(dir.path / "json"), FormatError);

  save_checkpoint(dir.path / "version", st, cfg);
  const fs::path vmeta = dir.path / "version" / "checkpoint.json";
  nlohmann::json j;
  std::ifstream(vmeta) >> j;
  j["version"] = 99;
  std::ofstream(vmeta) << j.dump();
  try {
    load_checkpoint(dir.path / "version");
    FAIL("expected FormatError");
  } catch (const FormatError& e) {
    CHECK(std::string(e.what()).find("version 99") != std::string::npos);
  }

  CHECK_THROWS_AS(load_checkpoint(dir.path / "nowhere"), FormatError);
}

TEST_CASE("resume: checkpoint then 10 more steps matches an uninterrupted run bitwise") {
  const Dataset ds = toy::small_dataset();
  const TrainConfig cfg = toy::small_config();
  TempDir dir("resume");

  std::vector<LossBreakdown> straight;
  TrainState a = init_train_state(cfg, ds.schema);
  FitOptions fa;
  fa.stop_at = 55;
  fa.on_step = [&](const MetricRecord& r) { straight.push_back(r.losses); };
  fit(ds, cfg, a, fa);

  // Stop just before the stage boundary so the resumed steps also cover the fresh-block initialization.
  TrainState b = init_train_state(cfg, ds.schema);
  FitOptions fb;
  fb.stop_at = 45;
  fit(ds, cfg, b, fb);
  save_checkpoint(dir.path, b, cfg);
  Checkpoint ck = load_checkpoint(dir.path);
  std::vector<LossBreakdown> resumed;
  FitOptions fc;
  fc.stop_at = 55;
  fc.on_step = [&](const MetricRecord& r) { resumed.push_back(r.losses); };
  fit(ds, ck.config, ck.state, fc);

  REQUIRE(straight.size() == 55);
  REQUIRE(resumed.size() == 10);
  for (std::size_t i = 0; i < 10; ++i) CHECK(resumed[i] == straight[45 + i]);
  CHECK(same_state(ck.state, a));
}

TEST_CASE("toy problem: loss_EP decreases over 500 steps") {
  const Dataset ds = toy::toy_dataset();
  const TrainConfig cfg = toy::toy_config(500);
  TrainState st = init_train_state(cfg, ds.schema);
  std::vector<double> ep;
  FitOptions fo;
  fo.on_step = [&](const MetricRecord& r) { ep.push_back(r.losses.loss_EP); };
  fit(ds, cfg, st, fo);
  REQUIRE(ep.size() == 500);
  double first = 0, last = 0;
  for (int i = 0; i < 50; ++i) first += ep[i], last += ep[450 + i];
  INFO("first " << first / 50 << " last " << last / 50);
  CHECK(last < first);
}

TEST_CASE("progressive consistency: 16x16 output pools to the 8x8 stage output") {
  const Dataset ds = toy::dataset(16, 40, 160);
  TrainConfig cfg = toy::small_config({100, 200, 200});
  cfg.model.ladder = {4, 8, 16};
  cfg.rho = {2, 2, 2};
  cfg.adam.lr = 1e-3;
  cfg.batch_size = 16;
  // At the default adversarial weight the generator barely beats the mean image at this scale.
  cfg.weights.w_adv = real(0.02);
  cfg.weights.kappa = 2;
  TempDir dir("progressive");
  TrainState st = init_train_state(cfg, ds.schema);
  FitOptions fo;
  fo.out_dir = dir.path;
  fit(ds, cfg, st, fo);
  Checkpoint stage8 = load_checkpoint(dir.path / "stages" / "stage-1");

  Rng rng(5);
  const std::size_t N = 16, K = cfg.model.embedding_dim;
  Tensor h({N, K});
  for (real& v : h.values()) v = real(rng.normal());
  std::vector<AttributeAssignment> attrs(N, AttributeAssignment(ds.schema.size()));
  for (auto& a : attrs)
    for (std::size_t c = 0; c < ds.schema.size(); ++c) a[c] = rng.index(ds.schema[c].levels.size());
  const Tensor onehot = one_hot_batch(ds.schema, attrs);

  auto render = [&](ParameterSet& ps, std::size_t stage) {
    Tape t;
    NetContext net(t, ps, {}, false);
    return generate(net, t.constant(h), t.constant(onehot), {stage, 1}).image.value();
  };
  const Tensor coarse = render(stage8.state.params, 1);
  const Tensor fine = avg_pool2d(render(st.params, 2), 2);
  REQUIRE(coarse.dims() == fine.dims());
  double err = 0;
  for (std::size_t i = 0; i < coarse.size(); ++i) err += std::abs(double(coarse[i]) - double(fine[i]));
  err /= double(coarse.size());
  INFO("mean abs difference " << err);
  CHECK(err < 0.15);
}
