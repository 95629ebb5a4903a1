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

// Command-line front end. Uses only the C interface in aest/aest.h.

#include <csignal>
#include <cstdio>
#include <cstring>
#include <map>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "aest/aest.h"
#include "httplib.h"

namespace {

// Prints the single-line error and returns the process exit code.
int fail(aest_status s, const std::string& message) {
  std::fprintf(stderr, "error: %s: %s\n", aest_status_name(s), message.c_str());
  return static_cast<int>(s);
}

int check(aest_status s) { return s == AEST_OK ? 0 : fail(s, aest_last_error()); }

std::string take(char* s) {
  std::string out = s ? s : "";
  aest_free(s);
  return out;
}

std::string quote(const std::string& s) {
  std::string out = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') out += '\\';
    out += c;
  }
  return out + "\"";
}

httplib::Server* g_server = nullptr;
void on_signal(int) {
  if (g_server) g_server->stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semi-supervised VAE/GAN for aesthetic rating prediction and design generation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", aest_version());

  auto* make = app.add_subcommand("make-data", "Build, split and write the synthetic dataset");
  std::string make_out;
  std::size_t rated = 200, unrated = 8000, resolution = 32;
  int raters = 60;
  std::uint64_t data_seed = 1;
  make->add_option("--out", make_out, "Output dataset directory")->required();
  make->add_option("--rated", rated, "Rated designs (each rendered in every viewpoint)")->capture_default_str();
  make->add_option("--unrated", unrated, "Unrated samples")->capture_default_str();
  make->add_option("--raters", raters, "Simulated raters")->capture_default_str();
  make->add_option("--resolution", resolution, "Image side in pixels")->capture_default_str();
  make->add_option("--seed", data_seed, "Dataset seed")->capture_default_str();

  auto* train = app.add_subcommand("train", "Train a model");
  std::string config, train_data, train_out;
  std::uint64_t train_seed = 0;
  bool quiet = false;
  train->add_option("--config", config, "train-config.json")->required();
  train->add_option("--data", train_data, "Dataset directory")->required();
  train->add_option("--out", train_out, "Output directory")->required();
  auto* seed_opt = train->add_option("--seed", train_seed, "Override the config seed");
  train->add_flag("--quiet", quiet, "Do not print validation progress");

  auto* eval = app.add_subcommand("eval", "Benchmark checkpoints and run the generation study");
  std::string eval_data, report;
  std::vector<std::string> checkpoints;
  std::size_t forest_seeds = 5, null_seeds = 30;
  bool no_generation = false;
  eval->add_option("--data", eval_data, "Dataset directory")->required();
  eval->add_option("--checkpoint", checkpoints, "Checkpoint (repeat once per model seed)");
  eval->add_option("--out", report, "Report path")->required();
  eval->add_option("--forest-seeds", forest_seeds, "Forest reseeds")->capture_default_str();
  eval->add_option("--null-seeds", null_seeds, "Null-configuration repeats")->capture_default_str();
  eval->add_flag("--no-generation", no_generation, "Skip the generation study");

  auto* gen = app.add_subcommand("generate", "Generate one design as a one-sample dataset");
  std::string gen_ck, gen_out;
  std::vector<std::string> attrs;
  std::uint64_t gen_seed = 0;
  gen->add_option("--checkpoint", gen_ck, "Checkpoint")->required();
  gen->add_option("--attrs", attrs, "Attributes as name=level (repeatable or comma separated)")
      ->required()
      ->delimiter(',');
  gen->add_option("--seed", gen_seed, "Sampling seed")->capture_default_str();
  gen->add_option("--out", gen_out, "Output directory")->required();

  auto* serve = app.add_subcommand("serve", "Serve the HTTP API over a checkpoint");
  std::string serve_ck, host = "127.0.0.1";
  int port = 8080;
  serve->add_option("--checkpoint", serve_ck, "Checkpoint")->required();
  serve->add_option("--port", port, "Port (0 picks a free one)")->capture_default_str();
  serve->add_option("--host", host, "Bind address")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::string msg = e.what();
    for (char& c : msg)
      if (c == '\n') c = ' ';
    return fail(AEST_BAD_REQUEST, msg);
  }

  if (*make) {
    const std::string opts = "{\"rated\":" + std::to_string(rated) + ",\"unrated\":" + std::to_string(unrated) +
                             ",\"raters\":" + std::to_string(raters) + ",\"resolution\":" + std::to_string(resolution) +
                             ",\"seed\":" + std::to_string(data_seed) + "}";
    char* summary = nullptr;
    if (int rc = check(aest_make_data(make_out.c_str(), opts.c_str(), &summary))) return rc;
    std::printf("%s\n", take(summary).c_str());
    return 0;
  }

  if (*train) {
    auto progress = [](const char* record, void* user) {
      if (!*static_cast<bool*>(user) && std::strstr(record, "\"val_mae\"")) std::fprintf(stderr, "%s\n", record);
    };
    bool silent = quiet;
    const int rc = check(aest_train(config.c_str(), train_data.c_str(), train_out.c_str(),
                                    seed_opt->count() ? &train_seed : nullptr, progress, &silent));
    if (rc) return rc;
    std::printf("{\"checkpoint\":%s}\n", quote(train_out + "/checkpoint").c_str());
    return 0;
  }

  if (*eval) {
    std::string opts = "{\"forest_seeds\":[";
    for (std::size_t i = 0; i < forest_seeds; ++i) opts += (i ? "," : "") + std::to_string(i);
    opts += "],\"null_seeds\":" + std::to_string(null_seeds) +
            ",\"generation\":" + (no_generation ? "false" : "true") + "}";
    std::vector<const char*> cks;
    for (const auto& c : checkpoints) cks.push_back(c.c_str());
    if (int rc = check(aest_evaluate(eval_data.c_str(), cks.data(), cks.size(), opts.c_str(), report.c_str())))
      return rc;
    std::printf("{\"report\":%s}\n", quote(report).c_str());
    return 0;
  }

  aest_service* svc = nullptr;
  if (int rc = check(aest_service_create(&svc))) return rc;
  struct Guard {
    aest_service* s;
    ~Guard() { aest_service_destroy(s); }
  } guard{svc};
  if (int rc = check(aest_service_load(svc, *gen ? gen_ck.c_str() : serve_ck.c_str()))) return rc;

  if (*gen) {
    std::string body = "{\"attributes\":{";
    for (std::size_t i = 0; i < attrs.size(); ++i) {
      const auto eq = attrs[i].find('=');
      if (eq == std::string::npos || eq == 0) return fail(AEST_BAD_REQUEST, "--attrs expects name=level, got '" + attrs[i] + "'");
      body += (i ? "," : "") + quote(attrs[i].substr(0, eq)) + ":" + quote(attrs[i].substr(eq + 1));
    }
    body += "},\"seed\":" + std::to_string(gen_seed) + "}";
    char* res = nullptr;
    if (int rc = check(aest_service_generate_files(svc, body.c_str(), gen_out.c_str(), &res))) return rc;
    std::printf("%s\n", take(res).c_str());
    return 0;
  }

  httplib::Server server;
  auto handler = [svc](const httplib::Request& req, httplib::Response& res) {
    int status = 500;
    char* out = nullptr;
    aest_service_handle(svc, req.method.c_str(), req.path.c_str(), req.body.c_str(), &status, &out);
    res.status = status;
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_content(out ? take(out) : std::string("{\"error\":{\"code\":\"internal\",\"message\":\"no response\"}}"),
                    "application/json");
  };
  server.Get(".*", handler);
  server.Post(".*", handler);
  server.Put(".*", handler);
  server.Delete(".*", handler);
  server.Options(".*", [](const httplib::Request&, httplib::Response& res) {
    res.set_header("Access-Control-Allow-Origin", "*");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.set_header("Access-Control-Allow-Methods", "GET, POST, OPTIONS");
    res.status = 204;
  });
  const int bound = port == 0 ? server.bind_to_any_port(host) : (server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) return fail(AEST_BAD_REQUEST, "cannot bind " + host + ":" + std::to_string(port));
  g_server = &server;
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::printf("{\"listening\":%s}\n", quote("http://" + host + ":" + std::to_string(bound)).c_str());
  std::fflush(stdout);
  server.listen_after_bind();
  return 0;
}
