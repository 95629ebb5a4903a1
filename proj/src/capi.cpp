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

#include "aest/aest.h"

#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "aest/evalbench.hpp"
#include "aest/service.hpp"
#include "aest/synth/dataset.hpp"
#include "aest/train.hpp"
#include "json.hpp"

using namespace aest;
namespace fs = std::filesystem;
using nlohmann::json;

struct aest_service {
  Service service;
};

namespace {

thread_local std::string g_last_error;

class StatusError : public std::runtime_error {
 public:
  StatusError(aest_status s, const std::string& what) : std::runtime_error(what), status(s) {}
  aest_status status;
};

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

aest_status from_api(ApiCode c) {
  switch (c) {
    case ApiCode::bad_request: return AEST_BAD_REQUEST;
    case ApiCode::not_found: return AEST_NOT_FOUND;
    case ApiCode::model_unloaded: return AEST_MODEL_UNLOADED;
    case ApiCode::internal: return AEST_INTERNAL;
  }
  return AEST_INTERNAL;
}

template <class F>
aest_status guarded(F&& f) {
  g_last_error.clear();
  try {
    f();
    return AEST_OK;
  } catch (const StatusError& e) {
    g_last_error = e.what();
    return e.status;
  } catch (const ApiError& e) {
    g_last_error = e.what();
    return from_api(e.code());
  } catch (const DivergenceError& e) {
    g_last_error = e.what();
    return AEST_DIVERGED;
  } catch (const FormatError& e) {
    g_last_error = e.what();
    return AEST_FORMAT;
  } catch (const ContractViolation& e) {
    g_last_error = e.what();
    return AEST_BAD_REQUEST;
  } catch (const json::exception& e) {
    g_last_error = std::string("invalid options: ") + e.what();
    return AEST_BAD_REQUEST;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return AEST_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return AEST_INTERNAL;
  }
}

void need(const void* p, const char* name) {
  if (!p) throw StatusError(AEST_BAD_REQUEST, std::string(name) + " must not be NULL");
}

void must_exist(const fs::path& p, const char* what) {
  if (!fs::exists(p)) throw StatusError(AEST_NOT_FOUND, std::string(what) + " not found: " + p.string());
}

json options(const char* text, const std::set<std::string>& allowed) {
  if (!text || !*text) return json::object();
  json j = json::parse(text);
  if (!j.is_object()) throw StatusError(AEST_BAD_REQUEST, "options must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw StatusError(AEST_BAD_REQUEST, "unknown option '" + k + "'");
  return j;
}

}  // namespace

extern "C" {

const char* aest_version(void) { return "0.1.0"; }

const char* aest_last_error(void) { return g_last_error.c_str(); }

const char* aest_status_name(aest_status s) {
  switch (s) {
    case AEST_OK: return "ok";
    case AEST_BAD_REQUEST: return "bad_request";
    case AEST_NOT_FOUND: return "not_found";
    case AEST_MODEL_UNLOADED: return "model_unloaded";
    case AEST_INTERNAL: return "internal";
    case AEST_FORMAT: return "format";
    case AEST_DIVERGED: return "diverged";
  }
  return "internal";
}

void aest_free(char* s) { std::free(s); }

aest_status aest_make_data(const char* out_dir, const char* options_json, char** summary_json) {
  return guarded([&] {
    need(out_dir, "out_dir");
    const json o = options(options_json, {"rated", "unrated", "raters", "seed", "resolution", "inconsistent_fraction",
                                          "alpha_cutoff"});
    DatasetOptions dopt;
    dopt.resolution = o.value("resolution", dopt.resolution);
    dopt.inconsistent_fraction = o.value("inconsistent_fraction", dopt.inconsistent_fraction);
    dopt.alpha_cutoff = o.value("alpha_cutoff", dopt.alpha_cutoff);
    const std::size_t rated = o.value("rated", std::size_t{200}), unrated = o.value("unrated", std::size_t{8000});
    const int raters = o.value("raters", kDefaultRaters);
    const std::uint64_t seed = o.value("seed", kDefaultSeed);
    RaterSummary rs;
    Dataset ds = build_dataset(rated, unrated, raters, seed, dopt, &rs);
    assign_splits(ds, seed);
    write_dataset(out_dir, ds);
    if (summary_json) {
      std::map<std::string, std::size_t> splits;
      for (const auto& s : ds.samples) ++splits[split_name(s.split)];
      std::size_t planted = 0, planted_dropped = 0;
      for (const auto& r : rs.filter.kept) planted += r.planted_inconsistent;
      for (const auto& r : rs.filter.dropped) planted += r.planted_inconsistent, planted_dropped += r.planted_inconsistent;
      *summary_json = dup(json{{"samples", ds.samples.size()},
                               {"rated", ds.rated_count()},
                               {"splits", splits},
                               {"raters", {{"kept", rs.kept},
                                           {"dropped", rs.dropped},
                                           {"planted_inconsistent", planted},
                                           {"planted_dropped", planted_dropped}}}}
                              .dump());
    }
  });
}

aest_status aest_train(const char* config_path, const char* data_dir, const char* out_dir, const uint64_t* seed,
                       aest_metric_callback callback, void* user) {
  return guarded([&] {
    need(config_path, "config_path");
    need(data_dir, "data_dir");
    need(out_dir, "out_dir");
    must_exist(config_path, "config file");
    must_exist(data_dir, "dataset directory");
    TrainConfig cfg = load_train_config(config_path);
    if (seed) cfg.seed = *seed;
    const Dataset ds = read_dataset(data_dir);
    const fs::path out(out_dir);
    fs::create_directories(out);
    {
      std::ofstream f(out / "train-config.json");
      f << train_config_to_json(cfg) << '\n';
    }
    std::ofstream metrics(out / "metrics.jsonl");
    if (!metrics) throw StatusError(AEST_BAD_REQUEST, "cannot write " + (out / "metrics.jsonl").string());
    TrainState st = init_train_state(cfg, ds.schema);
    FitOptions fo;
    fo.out_dir = out;
    fo.metrics = &metrics;
    if (callback) fo.on_step = [&](const MetricRecord& r) { callback(metric_json(r).c_str(), user); };
    fit(ds, cfg, st, fo);
  });
}

aest_status aest_evaluate(const char* data_dir, const char* const* checkpoints, size_t n_checkpoints,
                          const char* options_json, const char* report_path) {
  return guarded([&] {
    need(data_dir, "data_dir");
    need(report_path, "report_path");
    if (n_checkpoints > 0) need(checkpoints, "checkpoints");
    must_exist(data_dir, "dataset directory");
    const json o = options(options_json, {"forest_seeds", "generation", "study_seed", "null_seeds", "max_draws"});
    EvaluationOptions eo;
    eo.forest_seeds = o.value("forest_seeds", eo.forest_seeds);
    eo.generation = o.value("generation", eo.generation);
    eo.study_seed = o.value("study_seed", eo.study_seed);
    eo.null_seeds = o.value("null_seeds", eo.null_seeds);
    eo.max_draws = o.value("max_draws", eo.max_draws);
    eo.dataset_label = data_dir;
    std::vector<fs::path> cks;
    for (size_t i = 0; i < n_checkpoints; ++i) {
      need(checkpoints[i], "checkpoint path");
      must_exist(checkpoints[i], "checkpoint");
      cks.emplace_back(checkpoints[i]);
    }
    const Dataset ds = read_dataset(data_dir);
    const std::string report = evaluation_report(ds, cks, eo);
    std::ofstream f(report_path);
    if (!f) throw StatusError(AEST_BAD_REQUEST, std::string("cannot write ") + report_path);
    f << report << '\n';
  });
}

aest_status aest_service_create(aest_service** out) {
  return guarded([&] {
    need(out, "out");
    *out = new aest_service();
  });
}

void aest_service_destroy(aest_service* service) { delete service; }

aest_status aest_service_load(aest_service* service, const char* checkpoint) {
  return guarded([&] {
    need(service, "service");
    need(checkpoint, "checkpoint");
    must_exist(checkpoint, "checkpoint");
    service->service.load(checkpoint);
  });
}

aest_status aest_service_handle(aest_service* service, const char* method, const char* path, const char* body,
                                int* http_status, char** response_json) {
  g_last_error.clear();
  if (!service || !method || !path || !http_status || !response_json) {
    g_last_error = "service, method, path, http_status and response_json must not be NULL";
    return AEST_BAD_REQUEST;
  }
  try {
    const ApiResponse r = service->service.handle(method, path, body ? body : "");
    *http_status = r.status;
    *response_json = dup(r.body);
    if (r.status == 200) return AEST_OK;
    const json err = json::parse(r.body).at("error");
    g_last_error = err.at("message").get<std::string>();
    const std::string code = err.at("code").get<std::string>();
    if (code == "bad_request") return AEST_BAD_REQUEST;
    if (code == "not_found") return AEST_NOT_FOUND;
    if (code == "model_unloaded") return AEST_MODEL_UNLOADED;
    return AEST_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    *http_status = 500;
    *response_json = nullptr;
    return AEST_INTERNAL;
  }
}

aest_status aest_service_generate_files(aest_service* service, const char* request_json, const char* out_dir,
                                        char** response_json) {
  return guarded([&] {
    need(service, "service");
    need(request_json, "request_json");
    need(out_dir, "out_dir");
    const auto m = service->service.snapshot();
    if (!m) throw ApiError(ApiCode::model_unloaded, "no checkpoint is loaded");
    const json req = json::parse(request_json, nullptr, false);
    const json res = json::parse(api_generate(*m, request_json));
    const AttributeSchema& schema = m->params.schema();
    const ModelConfig& mc = m->params.model();
    const std::size_t R = mc.full_resolution(), C = mc.image_channels;

    ImageSample s;
    s.id = "generated-" + std::to_string(req.is_object() ? req.value("seed", std::uint64_t{0}) : 0);
    s.image = Tensor({C, R, R});
    s.mask = Tensor({1, R, R});
    for (std::size_t c = 0; c < C; ++c)
      for (std::size_t y = 0; y < R; ++y)
        for (std::size_t x = 0; x < R; ++x) s.image[(c * R + y) * R + x] = static_cast<real>(res["image"][c][y][x].get<double>());
    for (std::size_t y = 0; y < R; ++y)
      for (std::size_t x = 0; x < R; ++x) s.mask[y * R + x] = res["mask"][y][x].get<double>() >= 0.5 ? 1 : 0;
    for (std::size_t c = 0; c < schema.size(); ++c)
      s.attributes.push_back(schema.level_index(c, req.at("attributes").at(schema[c].name).get<std::string>()));
    Dataset ds;
    ds.schema = schema;
    ds.samples.push_back(std::move(s));
    write_dataset(out_dir, ds);
    if (response_json)
      *response_json = dup(json{{"id", ds.samples[0].id},
                                {"embedding", res["embedding"]},
                                {"rating", res["rating"]},
                                {"checkpoint_id", m->id}}
                               .dump());
  });
}

}  // extern "C"
