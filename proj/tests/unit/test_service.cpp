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

#include <cmath>
#include <filesystem>
#include <set>
#include <thread>

#include "aest/evalbench.hpp"
#include "aest/service.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support/toy.hpp"

using namespace aest;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// One small trained checkpoint shared by every case.
struct Fixture {
  fs::path dir;
  Dataset ds;
  Service svc;

  Fixture() {
    dir = fs::temp_directory_path() / ("aest-service-" + std::to_string(::getpid()));
    fs::remove_all(dir);
    ds = toy::small_dataset();
    const TrainConfig cfg = toy::small_config({20, 20});
    TrainState st = init_train_state(cfg, ds.schema);
    FitOptions fo;
    fo.out_dir = dir;
    fit(ds, cfg, st, fo);
    svc.load(dir);
  }
  ~Fixture() { fs::remove_all(dir); }
};

Fixture& fixture() {
  static Fixture f;
  return f;
}

json call(const Service& s, const std::string& method, const std::string& path, const json& body, int want = 200) {
  const ApiResponse r = s.handle(method, path, body.is_null() ? "" : body.dump());
  INFO(r.body);
  CHECK(r.status == want);
  return json::parse(r.body);
}

json attrs() { return {{"bodytype", "boxy"}, {"viewpoint", "side"}, {"shade", "light"}}; }

void check_error(const json& j, const std::string& code, const std::string& fragment) {
  REQUIRE(j.contains("error"));
  CHECK(j["error"]["code"] == code);
  const std::string msg = j["error"]["message"];
  INFO(msg);
  CHECK(msg.find(fragment) != std::string::npos);
}

}  // namespace

TEST_CASE("info reflects the loaded checkpoint and errors before a load") {
  Service empty;
  check_error(call(empty, "GET", "/api/info", nullptr, 503), "model_unloaded", "no checkpoint");
  auto& f = fixture();
  const json info = call(f.svc, "GET", "/api/info", nullptr);
  CHECK(info["embedding_dim"] == 8);
  CHECK(info["resolutions"] == json::array({4, 8}));
  CHECK(info["resolution"] == 8);
  CHECK(info["checkpoint_id"] == f.svc.snapshot()->id);
  REQUIRE(info["schema"].size() == f.ds.schema.size());
  for (std::size_t c = 0; c < f.ds.schema.size(); ++c) {
    CHECK(info["schema"][c]["name"] == f.ds.schema[c].name);
    CHECK(info["schema"][c]["levels"] == json(f.ds.schema[c].levels));
  }
}

TEST_CASE("generate: deterministic, clamped, projected, and echoes supplied embeddings") {
  auto& f = fixture();
  const json req = {{"attributes", attrs()}, {"seed", 7}};
  const ApiResponse a = f.svc.handle("POST", "/api/generate", req.dump());
  const ApiResponse b = f.svc.handle("POST", "/api/generate", req.dump());
  CHECK(a.status == 200);
  CHECK(a.body == b.body);
  const json g = json::parse(a.body);
  CHECK(g["rating"].get<double>() >= 1);
  CHECK(g["rating"].get<double>() <= 5);
  double n2 = 0;
  for (double v : g["embedding"].get<std::vector<double>>()) n2 += v * v;
  CHECK(std::sqrt(n2) == doctest::Approx(std::sqrt(8.0)).epsilon(1e-12));
  REQUIRE(g["image"].size() == 3);
  CHECK(g["image"][0].size() == 8);
  CHECK(g["image"][0][0].size() == 8);
  CHECK(g["mask"].size() == 8);
  for (const auto& plane : g["image"])
    for (const auto& row : plane)
      for (double v : row) CHECK((v >= 0 && v <= 1));
  CHECK(call(f.svc, "POST", "/api/generate", {{"attributes", attrs()}, {"seed", 8}}) != g);

  const json emb = {0.1, -1.0 / 3, 2.5, 1e-7, -0.7, 0.0, 3.14159, 1.0 / 7};
  const ApiResponse e = f.svc.handle("POST", "/api/generate", json{{"attributes", attrs()}, {"embedding", emb}}.dump());
  const json je = json::parse(e.body);
  CHECK(je["embedding"] == emb);
  CHECK(je["embedding"].dump() == emb.dump());
}

TEST_CASE("generate: bad requests name the offending field") {
  auto& f = fixture();
  json a = attrs();
  a["shade"] = "purple";
  check_error(call(f.svc, "POST", "/api/generate", {{"attributes", a}}, 400), "bad_request", "purple");
  a = attrs();
  a["colour"] = "red";
  check_error(call(f.svc, "POST", "/api/generate", {{"attributes", a}}, 400), "bad_request", "colour");
  a = attrs();
  a.erase("viewpoint");
  check_error(call(f.svc, "POST", "/api/generate", {{"attributes", a}}, 400), "bad_request", "viewpoint");
  check_error(call(f.svc, "POST", "/api/generate", {{"attributes", attrs()}, {"embedding", {1, 2}}}, 400),
              "bad_request", "length 2");
  check_error(call(f.svc, "POST", "/api/generate", {{"attributes", attrs()}, {"seed", -1}}, 400), "bad_request",
              "seed");
  check_error(call(f.svc, "POST", "/api/generate", {{"attributes", attrs()}, {"sede", 1}}, 400), "bad_request",
              "sede");
  const ApiResponse r = f.svc.handle("POST", "/api/generate", "{not json");
  CHECK(r.status == 400);
  check_error(json::parse(r.body), "bad_request", "JSON");
}

TEST_CASE("morph: endpoints match generate and the step bounds are enforced") {
  auto& f = fixture();
  const json a = call(f.svc, "POST", "/api/generate", {{"attributes", attrs()}, {"seed", 1}});
  const json b = call(f.svc, "POST", "/api/generate", {{"attributes", attrs()}, {"seed", 2}});
  const json m2 = call(f.svc, "POST", "/api/morph",
                       {{"from", a["embedding"]}, {"to", b["embedding"]}, {"steps", 2}, {"attributes", attrs()}});
  REQUIRE(m2["frames"].size() == 2);
  CHECK(m2["t"] == json::array({0.0, 1.0}));
  CHECK(m2["frames"][0]["image"] == a["image"]);
  CHECK(m2["frames"][0]["rating"] == a["rating"]);
  CHECK(m2["frames"][1]["image"] == b["image"]);
  CHECK(m2["frames"][1]["rating"] == b["rating"]);

  const json m9 = call(f.svc, "POST", "/api/morph",
                       {{"from", a["embedding"]}, {"to", b["embedding"]}, {"steps", 9}, {"attributes", attrs()}});
  REQUIRE(m9["frames"].size() == 9);
  REQUIRE(m9["t"].size() == 9);
  for (int i = 0; i < 9; ++i) CHECK(m9["t"][i].get<double>() == doctest::Approx(i / 8.0));
  CHECK(m9["frames"][8]["image"] == b["image"]);

  for (int steps : {1, 65})
    check_error(call(f.svc, "POST", "/api/morph",
                     {{"from", a["embedding"]}, {"to", b["embedding"]}, {"steps", steps}, {"attributes", attrs()}}, 400),
                "bad_request", "steps");
  check_error(call(f.svc, "POST", "/api/morph",
                   {{"from", json(std::vector<double>(8, 0.0))}, {"to", b["embedding"]}, {"steps", 3}, {"attributes", attrs()}},
                   400),
              "bad_request", "nonzero");
}

TEST_CASE("encode and predict share the generate code path") {
  auto& f = fixture();
  const ImageSample& s = f.ds.samples.front();
  json image = json::array();
  for (std::size_t y = 0; y < 8; ++y) {
    json row = json::array();
    for (std::size_t x = 0; x < 8; ++x) row.push_back(static_cast<double>(s.image[y * 8 + x]));
    image.push_back(row);
  }
  const json soft = call(f.svc, "POST", "/api/encode", {{"image", image}});
  CHECK(soft["mu"].size() == 8);
  CHECK(soft["sigma"].size() == 8);
  for (double v : soft["sigma"].get<std::vector<double>>()) CHECK(v > 0);
  CHECK(soft["attributes_given"] == false);
  for (const auto& attr : f.ds.schema.attributes()) {
    double total = 0;
    for (const auto& [level, p] : soft["attribute_probs"][attr.name].items()) total += p.get<double>();
    CHECK(total == doctest::Approx(1).epsilon(1e-9));
  }
  const json given = call(f.svc, "POST", "/api/encode", {{"image", json::array({image, image, image})}, {"attributes", attrs()}});
  CHECK(given["attributes_given"] == true);

  const json p = call(f.svc, "POST", "/api/predict", {{"embedding", given["mu"]}});
  const json g = call(f.svc, "POST", "/api/generate", {{"attributes", attrs()}, {"embedding", given["mu"]}});
  CHECK(p["rating"] == g["rating"]);
  CHECK(p["rating"].get<double>() >= 1);
  CHECK(p["rating"].get<double>() <= 5);

  json small = json::array({json::array({0.5, 0.5}), json::array({0.5, 0.5})});
  check_error(call(f.svc, "POST", "/api/encode", {{"image", small}}, 400), "bad_request", "[3][8][8]");
  image[0][0] = 1.5;
  check_error(call(f.svc, "POST", "/api/encode", {{"image", image}}, 400), "bad_request", "[0, 1]");
  check_error(call(f.svc, "POST", "/api/predict", {{"embedding", {1, 2, 3}}}, 400), "bad_request", "length 3");
}

TEST_CASE("routing errors use the closed code set") {
  auto& f = fixture();
  check_error(call(f.svc, "GET", "/api/nothing", nullptr, 404), "not_found", "/api/nothing");
  check_error(call(f.svc, "GET", "/api/generate", nullptr, 400), "bad_request", "POST");
  const std::set<std::string> codes = {"bad_request", "not_found", "model_unloaded", "internal"};
  for (const auto& body : {std::string("[]"), std::string("1"), std::string("")}) {
    const json j = json::parse(f.svc.handle("POST", "/api/predict", body).body);
    CHECK(codes.count(j["error"]["code"].get<std::string>()) == 1);
  }
  CHECK(api_http_status(ApiCode::model_unloaded) == 503);
}

TEST_CASE("concurrent requests match sequential answers; reload swaps snapshots") {
  auto& f = fixture();
  std::vector<std::string> bodies, sequential;
  for (int s = 0; s < 8; ++s) {
    bodies.push_back(json{{"attributes", attrs()}, {"seed", s}}.dump());
    sequential.push_back(f.svc.handle("POST", "/api/generate", bodies.back()).body);
  }
  std::vector<std::string> parallel(bodies.size());
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < bodies.size(); ++i)
    threads.emplace_back([&, i] { parallel[i] = f.svc.handle("POST", "/api/generate", bodies[i]).body; });
  for (auto& t : threads) t.join();
  CHECK(parallel == sequential);

  const auto before = f.svc.snapshot();
  f.svc.load(f.dir / "stages" / "stage-0");
  CHECK(f.svc.snapshot() != before);
  CHECK(before->id == json::parse(api_info(*before))["checkpoint_id"]);
  f.svc.load(f.dir);
  CHECK(f.svc.handle("POST", "/api/generate", bodies[0]).body == sequential[0]);
}

TEST_CASE("checkpoint paths resolve from the run directory, the checkpoint directory or its json") {
  auto& f = fixture();
  const fs::path ck = f.dir / "checkpoint";
  CHECK(resolve_checkpoint(f.dir) == ck);
  CHECK(resolve_checkpoint(ck) == ck);
  CHECK(resolve_checkpoint(ck / "checkpoint.json") == ck);
  CHECK_THROWS_AS(resolve_checkpoint(f.dir / "missing"), FormatError);
}
