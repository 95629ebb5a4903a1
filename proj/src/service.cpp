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

#include "aest/service.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "aest/evalbench.hpp"
#include "aest/train.hpp"
#include "json.hpp"
#include "json_util.hpp"

namespace aest::inline AEST_PREC {

namespace fs = std::filesystem;
using nlohmann::json;

const char* api_code_name(ApiCode code) {
  switch (code) {
    case ApiCode::bad_request: return "bad_request";
    case ApiCode::not_found: return "not_found";
    case ApiCode::model_unloaded: return "model_unloaded";
    case ApiCode::internal: return "internal";
  }
  return "internal";
}

int api_http_status(ApiCode code) {
  switch (code) {
    case ApiCode::bad_request: return 400;
    case ApiCode::not_found: return 404;
    case ApiCode::model_unloaded: return 503;
    case ApiCode::internal: return 500;
  }
  return 500;
}

std::string api_error_body(ApiCode code, const std::string& message) {
  return json{{"error", {{"code", api_code_name(code)}, {"message", message}}}}.dump();
}

fs::path resolve_checkpoint(const fs::path& path) {
  if (fs::is_regular_file(path) && path.filename() == "checkpoint.json") return path.parent_path();
  if (fs::exists(path / "checkpoint.json")) return path;
  if (fs::exists(path / "checkpoint" / "checkpoint.json")) return path / "checkpoint";
  throw FormatError("no checkpoint found at " + path.string());
}

std::shared_ptr<const LoadedModel> load_model(const fs::path& path) {
  const fs::path dir = resolve_checkpoint(path);
  Checkpoint ck = load_checkpoint(dir);
  auto m = std::make_shared<LoadedModel>();
  m->params = std::move(ck.state.params);
  m->config = std::move(ck.config);
  m->id = ck.id;
  m->step = ck.state.step;
  m->source = dir;
  return m;
}

namespace {

[[noreturn]] void bad(const std::string& what) { throw ApiError(ApiCode::bad_request, what); }

json parse_body(const std::string& body, const std::set<std::string>& allowed) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::parse_error& e) {
    bad("request body is not valid JSON (byte " + std::to_string(e.byte) + ")");
  }
  if (!j.is_object()) bad("request body must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) bad("unknown field '" + k + "'");
  return j;
}

// The inference helpers take a mutable reference but only read the parameters.
ParameterSet& params_of(const LoadedModel& m) { return const_cast<ParameterSet&>(m.params); }

AttributeAssignment parse_attributes(const AttributeSchema& schema, const json& j) {
  if (!j.is_object()) bad("'attributes' must be an object mapping attribute names to levels");
  for (const auto& [name, level] : j.items())
    if (!schema.find(name)) bad("unknown attribute '" + name + "'");
  AttributeAssignment a(schema.size());
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const std::string& name = schema[c].name;
    if (!j.contains(name)) bad("missing attribute '" + name + "'");
    if (!j.at(name).is_string()) bad("attribute '" + name + "' must be a string level");
    const std::string level = j.at(name).get<std::string>();
    const auto& levels = schema[c].levels;
    const auto it = std::find(levels.begin(), levels.end(), level);
    if (it == levels.end()) bad("unknown level '" + level + "' for attribute '" + name + "'");
    a[c] = static_cast<std::size_t>(it - levels.begin());
  }
  return a;
}

std::vector<double> parse_vector(const json& j, const char* field, std::size_t k) {
  if (!j.is_array()) bad("'" + std::string(field) + "' must be an array of numbers");
  if (j.size() != k)
    bad("'" + std::string(field) + "' has length " + std::to_string(j.size()) + ", expected " + std::to_string(k));
  std::vector<double> v;
  for (const auto& x : j) {
    if (!x.is_number()) bad("'" + std::string(field) + "' must contain only numbers");
    const double d = x.get<double>();
    if (!std::isfinite(d)) bad("'" + std::string(field) + "' must be finite");
    v.push_back(d);
  }
  return v;
}

json nested(const Tensor& t, std::size_t offset, std::size_t c, std::size_t r) {
  json out = json::array();
  for (std::size_t ch = 0; ch < c; ++ch) {
    json plane = json::array();
    for (std::size_t y = 0; y < r; ++y) {
      json row = json::array();
      for (std::size_t x = 0; x < r; ++x)
        row.push_back(std::clamp(static_cast<double>(t[offset + (ch * r + y) * r + x]), 0.0, 1.0));
      plane.push_back(std::move(row));
    }
    out.push_back(std::move(plane));
  }
  return out;
}

struct Frame {
  json image, mask;
  double rating = 0;
};

// One design at a time, so a frame never depends on what else is in the batch.
Frame render(const LoadedModel& m, const std::vector<double>& h, const AttributeAssignment& a) {
  ParameterSet& ps = params_of(m);
  const ModelConfig& mc = ps.model();
  const std::size_t r = mc.full_resolution();
  const GeneratedBatch g = generate_images(ps, {h}, {a});
  Frame f;
  f.image = nested(g.image, 0, mc.image_channels, r);
  f.mask = nested(g.mask, 0, 1, r)[0];
  f.rating = std::clamp(predict_from_embeddings(ps, {h}).front(), kScaleMin, kScaleMax);
  return f;
}

std::uint64_t parse_seed(const json& j) {
  if (!j.contains("seed")) return 0;
  const json& s = j.at("seed");
  if (!s.is_number_unsigned())
    bad("'seed' must be a nonnegative integer");
  return s.get<std::uint64_t>();
}

}  // namespace

std::string api_info(const LoadedModel& m) {
  const ModelConfig& mc = m.params.model();
  return json{{"embedding_dim", mc.embedding_dim},
              {"resolutions", mc.ladder},
              {"resolution", mc.full_resolution()},
              {"image_channels", mc.image_channels},
              {"schema", schema_json(m.params.schema())},
              {"checkpoint_id", m.id},
              {"step", m.step}}
      .dump();
}

std::string api_generate(const LoadedModel& m, const std::string& body) {
  const json j = parse_body(body, {"attributes", "embedding", "seed"});
  if (!j.contains("attributes")) bad("missing field 'attributes'");
  const AttributeAssignment a = parse_attributes(m.params.schema(), j.at("attributes"));
  const std::size_t K = m.params.model().embedding_dim;
  std::vector<double> h;
  json echo;
  if (j.contains("embedding")) {
    h = parse_vector(j.at("embedding"), "embedding", K);
    echo = j.at("embedding");
  } else {
    Rng rng(parse_seed(j));
    h.resize(K);
    for (double& v : h) v = rng.normal();
    h = project_to_sphere(std::move(h));
    echo = h;
  }
  Frame f = render(m, h, a);
  return json{{"image", std::move(f.image)}, {"mask", std::move(f.mask)}, {"embedding", echo}, {"rating", f.rating}}
      .dump();
}

std::string api_morph(const LoadedModel& m, const std::string& body) {
  const json j = parse_body(body, {"from", "to", "steps", "attributes"});
  for (const char* k : {"from", "to", "steps", "attributes"})
    if (!j.contains(k)) bad("missing field '" + std::string(k) + "'");
  const AttributeAssignment a = parse_attributes(m.params.schema(), j.at("attributes"));
  const std::size_t K = m.params.model().embedding_dim;
  const std::vector<double> from = parse_vector(j.at("from"), "from", K), to = parse_vector(j.at("to"), "to", K);
  const auto zero = [](const std::vector<double>& v) { return std::all_of(v.begin(), v.end(), [](double x) { return x == 0; }); };
  if (zero(from) || zero(to)) bad("'from' and 'to' must be nonzero vectors");
  if (!j.at("steps").is_number_integer()) bad("'steps' must be an integer");
  const long steps = j.at("steps").get<long>();
  if (steps < 2 || steps > 64) bad("'steps' must lie in [2, 64], got " + std::to_string(steps));
  json frames = json::array(), ts = json::array();
  for (long i = 0; i < steps; ++i) {
    const double t = i == steps - 1 ? 1.0 : static_cast<double>(i) / static_cast<double>(steps - 1);
    Frame f = render(m, slerp(from, to, t), a);
    frames.push_back({{"image", std::move(f.image)}, {"rating", f.rating}});
    ts.push_back(t);
  }
  return json{{"frames", std::move(frames)}, {"t", std::move(ts)}}.dump();
}

std::string api_encode(const LoadedModel& m, const std::string& body) {
  const json j = parse_body(body, {"image", "attributes"});
  if (!j.contains("image")) bad("missing field 'image'");
  ParameterSet& ps = params_of(m);
  const ModelConfig& mc = ps.model();
  const AttributeSchema& schema = ps.schema();
  const std::size_t R = mc.full_resolution(), C = mc.image_channels;
  const std::string expected = "[" + std::to_string(C) + "][" + std::to_string(R) + "][" + std::to_string(R) +
                               "] or [" + std::to_string(R) + "][" + std::to_string(R) + "] (grayscale)";

  // Accept [C][R][R], [1][R][R] or [R][R]; single planes are broadcast to every channel.
  const json& img = j.at("image");
  std::vector<const json*> planes;
  if (img.is_array() && !img.empty() && img[0].is_array() && !img[0].empty() && img[0][0].is_array()) {
    for (const auto& p : img) planes.push_back(&p);
  } else {
    planes.push_back(&img);
  }
  if (planes.size() != 1 && planes.size() != C) bad("image must be " + expected);
  Tensor x({1, C, R, R});
  for (std::size_t p = 0; p < planes.size(); ++p) {
    const json& plane = *planes[p];
    if (!plane.is_array() || plane.size() != R) bad("image must be " + expected);
    for (std::size_t y = 0; y < R; ++y) {
      const json& row = plane[y];
      if (!row.is_array() || row.size() != R) bad("image must be " + expected);
      for (std::size_t xx = 0; xx < R; ++xx) {
        if (!row[xx].is_number()) bad("image values must be numbers");
        const double v = row[xx].get<double>();
        if (!(v >= 0 && v <= 1)) bad("image values must lie in [0, 1]");
        const std::size_t c0 = planes.size() == 1 ? 0 : p, c1 = planes.size() == 1 ? C : p + 1;
        for (std::size_t c = c0; c < c1; ++c) x[(c * R + y) * R + xx] = static_cast<real>(v);
      }
    }
  }
  const bool given = j.contains("attributes");
  const Tensor attrs =
      given ? one_hot_batch(schema, {parse_attributes(schema, j.at("attributes"))}) : uniform_attributes(schema, 1);

  Tape tape;
  NetContext net(tape, ps, {}, false);
  const Encoding e = encode(net, tape.constant(x), tape.constant(attrs), {mc.ladder.size() - 1, 1});
  const Tensor& mu = e.mu.value();
  const Tensor& ls = e.log_sigma.value();
  const Tensor& logits = e.logits.value();
  json jmu = json::array(), jsigma = json::array(), probs = json::object();
  for (std::size_t k = 0; k < mc.embedding_dim; ++k) {
    jmu.push_back(static_cast<double>(mu[k]));
    jsigma.push_back(std::exp(static_cast<double>(ls[k])));
  }
  for (std::size_t c = 0; c < schema.size(); ++c) {
    const std::size_t b = schema.offset(c), l = schema[c].levels.size();
    double mx = -INFINITY, z = 0;
    for (std::size_t i = 0; i < l; ++i) mx = std::max(mx, static_cast<double>(logits[b + i]));
    for (std::size_t i = 0; i < l; ++i) z += std::exp(static_cast<double>(logits[b + i]) - mx);
    json levels = json::object();
    for (std::size_t i = 0; i < l; ++i)
      levels[schema[c].levels[i]] = std::exp(static_cast<double>(logits[b + i]) - mx) / z;
    probs[schema[c].name] = std::move(levels);
  }
  return json{{"mu", jmu}, {"sigma", jsigma}, {"attribute_probs", probs}, {"attributes_given", given}}.dump();
}

std::string api_predict(const LoadedModel& m, const std::string& body) {
  const json j = parse_body(body, {"embedding"});
  if (!j.contains("embedding")) bad("missing field 'embedding'");
  const std::vector<double> h = parse_vector(j.at("embedding"), "embedding", m.params.model().embedding_dim);
  const double y = predict_from_embeddings(params_of(m), {h}).front();
  return json{{"rating", std::clamp(y, kScaleMin, kScaleMax)}}.dump();
}

void Service::load(const fs::path& checkpoint) {
  auto m = load_model(checkpoint);
  std::lock_guard<std::mutex> lock(mu_);
  model_ = std::move(m);
}

void Service::unload() {
  std::lock_guard<std::mutex> lock(mu_);
  model_.reset();
}

std::shared_ptr<const LoadedModel> Service::snapshot() const {
  std::lock_guard<std::mutex> lock(mu_);
  return model_;
}

ApiResponse Service::handle(const std::string& method, const std::string& path, const std::string& body) const {
  using Handler = std::string (*)(const LoadedModel&, const std::string&);
  struct Route {
    const char* method;
    const char* path;
    Handler fn;
  };
  static const Route routes[] = {
      {"GET", "/api/info", [](const LoadedModel& m, const std::string&) { return api_info(m); }},
      {"POST", "/api/generate", api_generate},
      {"POST", "/api/morph", api_morph},
      {"POST", "/api/encode", api_encode},
      {"POST", "/api/predict", api_predict},
  };
  try {
    const Route* route = nullptr;
    for (const auto& r : routes)
      if (path == r.path) route = &r;
    if (!route) throw ApiError(ApiCode::not_found, "no endpoint " + path);
    if (method != route->method)
      throw ApiError(ApiCode::bad_request, path + " expects " + route->method + ", got " + method);
    const auto m = snapshot();
    if (!m) throw ApiError(ApiCode::model_unloaded, "no checkpoint is loaded");
    return {200, route->fn(*m, body)};
  } catch (const ApiError& e) {
    return {api_http_status(e.code()), api_error_body(e.code(), e.what())};
  } catch (const std::exception& e) {
    return {500, api_error_body(ApiCode::internal, e.what())};
  }
}

}  // namespace aest::inline AEST_PREC
