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

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails.
//
//   aest_acceptance [--only NAME]... [--work DIR] [--benchmark-config FILE]
//                   [--smoke-config FILE] [--bin-dir DIR] [--cli PATH]

#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <chrono>
#include <cmath>
#include <cstring>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "aest/evalbench.hpp"
#include "aest/service.hpp"
#include "aest/train.hpp"
#include "httplib.h"
#include "json.hpp"
#include "support/oracles.hpp"
#include "support/toy.hpp"

using namespace aest;
namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Settings {
  fs::path work, bin_dir, cli, benchmark_config, smoke_config;
};

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

// Runs a command, returning its exit code.
int run(const std::string& cmd) {
  const int rc = std::system((cmd + " > /dev/null 2>&1").c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

// Runs doctest binaries with test-case filters and enforces a time budget.
Outcome doctest_suite(const Settings& s, const std::vector<std::pair<std::string, std::string>>& runs,
                      double budget_s) {
  const auto t0 = Clock::now();
  std::vector<std::string> failed;
  for (const auto& [bin, filter] : runs) {
    std::string cmd = (s.bin_dir / bin).string();
    if (!filter.empty()) cmd += " '--test-case=" + filter + "'";
    if (run(cmd) != 0) failed.push_back(bin + (filter.empty() ? "" : "[" + filter + "]"));
  }
  const double t = seconds_since(t0);
  std::string detail = std::to_string(runs.size()) + " suite(s) in " + fmt(t, 3) + " s (budget " + fmt(budget_s, 3) + " s)";
  for (const auto& f : failed) detail += "; failed " + f;
  return {failed.empty() && t < budget_s, detail};
}

Outcome spectral_bound() {
  const Dataset ds = toy::toy_dataset();
  const TrainConfig cfg = toy::toy_config(500);
  TrainState st = init_train_state(cfg, ds.schema);
  fit(ds, cfg, st);
  double worst = 0, worst_gap = 0;
  std::string worst_name;
  std::size_t n = 0;
  for (std::size_t i = 0; i < st.params.size(); ++i) {
    const Parameter& p = st.params[i];
    if (!p.spectral) continue;
    // The weight the next forward pass would use: one more warm-started step.
    const SpectralValue v = spectral_normalize(p.value, p.sn, 1);
    const double top = oracle::top_singular_value(v.weight);
    ++n;
    if (top > worst) {
      const auto sv = oracle::singular_values(p.value);
      worst = top, worst_name = p.name, worst_gap = sv.size() > 1 ? sv[1] / sv[0] : 0;
    }
  }
  return {n > 0 && worst <= 1 + 1e-2, std::to_string(n) + " weights after " + std::to_string(st.step) +
                                          " steps; largest top singular value " + fmt(worst, 6) + " (" + worst_name + ", s2/s1 " + fmt(worst_gap, 4) + ")"};
}

Outcome rater_filter() {
  RaterSummary rs;
  build_dataset(200, 1, kDefaultRaters, kDefaultSeed, {}, &rs);
  std::size_t planted = 0, planted_removed = 0, consistent = 0, consistent_removed = 0;
  for (const auto& r : rs.filter.kept) r.planted_inconsistent ? ++planted : ++consistent;
  for (const auto& r : rs.filter.dropped)
    r.planted_inconsistent ? (++planted, ++planted_removed) : (++consistent, ++consistent_removed);
  const double removed = planted ? double(planted_removed) / double(planted) : 0;
  const double false_drop = consistent ? double(consistent_removed) / double(consistent) : 1;
  return {planted > 0 && removed >= 0.9 && false_drop <= 0.1,
          "planted removed " + std::to_string(planted_removed) + "/" + std::to_string(planted) + ", consistent removed " +
              std::to_string(consistent_removed) + "/" + std::to_string(consistent)};
}

std::vector<std::string> metric_log(const Dataset& ds, const TrainConfig& cfg, long stop_at = -1) {
  TrainState st = init_train_state(cfg, ds.schema);
  std::ostringstream out;
  FitOptions fo;
  fo.metrics = &out;
  fo.stop_at = stop_at;
  fit(ds, cfg, st, fo);
  std::vector<std::string> lines;
  std::istringstream in(out.str());
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  return lines;
}

bool same_params(const ParameterSet& a, const ParameterSet& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const Tensor &x = a[i].value, &y = b[i].value;
    if (x.size() != y.size() || std::memcmp(x.data(), y.data(), x.size() * sizeof(real)) != 0) return false;
    if (!(a[i].sn == b[i].sn)) return false;
  }
  return true;
}

Outcome determinism(const Settings& s) {
  const Dataset ds = toy::small_dataset();
  const TrainConfig cfg = toy::small_config({40, 40});
  const auto a = metric_log(ds, cfg), b = metric_log(ds, cfg);
  const bool logs = !a.empty() && a == b;

  // Stop at 45, checkpoint, reload, run 10 more; compare with an uninterrupted run.
  const fs::path dir = s.work / "resume";
  fs::remove_all(dir);
  TrainConfig ten = cfg;
  TrainState first = init_train_state(ten, ds.schema);
  FitOptions stop;
  stop.stop_at = 45;
  fit(ds, ten, first, stop);
  save_checkpoint(dir, first, ten);
  Checkpoint ck = load_checkpoint(dir);
  std::ostringstream resumed_log, full_log;
  FitOptions cont;
  cont.stop_at = 55;
  cont.metrics = &resumed_log;
  fit(ds, ck.config, ck.state, cont);

  TrainState full = init_train_state(ten, ds.schema);
  FitOptions straight;
  straight.stop_at = 55;
  straight.metrics = &full_log;
  fit(ds, ten, full, straight);
  std::vector<std::string> tail;
  {
    std::istringstream in(full_log.str());
    for (std::string l; std::getline(in, l);) tail.push_back(l);
  }
  std::vector<std::string> resumed;
  {
    std::istringstream in(resumed_log.str());
    for (std::string l; std::getline(in, l);) resumed.push_back(l);
  }
  const bool resume_logs = resumed.size() == 10 && tail.size() == 55 &&
                           std::equal(resumed.begin(), resumed.end(), tail.end() - 10);
  const bool resume_params = same_params(ck.state.params, full.params) && ck.state.step == full.step;
  fs::remove_all(dir);
  return {logs && resume_logs && resume_params,
          "two fits: " + std::string(logs ? "identical" : "DIFFERENT") + " logs over " + std::to_string(a.size()) +
              " steps; resume 45->55: logs " + (resume_logs ? "identical" : "DIFFERENT") + ", parameters " +
              (resume_params ? "identical" : "DIFFERENT")};
}

// Trains one model per seed on the default dataset; shared by the benchmark and generation checks.
struct BenchmarkRun {
  Dataset ds;
  std::vector<ParameterSet> models;
  double train_seconds = 0;
};

// Trains seeds 0 .. count-1 on first use and keeps them for later checks.
BenchmarkRun& benchmark_models(const Settings& s, std::size_t count) {
  static std::optional<BenchmarkRun> cache;
  if (!cache) {
    cache.emplace();
    cache->ds = build_dataset(200, 8000, kDefaultRaters, kDefaultSeed);
    assign_splits(cache->ds, kDefaultSeed);
  }
  const TrainConfig base = load_train_config(s.benchmark_config);
  while (cache->models.size() < count) {
    const auto t0 = Clock::now();
    TrainConfig cfg = base;
    cfg.seed = cache->models.size();
    TrainState st = init_train_state(cfg, cache->ds.schema);
    fit(cache->ds, cfg, st);
    cache->train_seconds += seconds_since(t0);
    std::cerr << "  [benchmark] seed " << cfg.seed << " trained in " << fmt(seconds_since(t0), 4) << " s\n";
    cache->models.push_back(std::move(st.params));
  }
  return *cache;
}

Outcome prediction_benchmark(const Settings& s) {
  BenchmarkRun& b = benchmark_models(s, 3);
  const auto t0 = Clock::now();
  std::vector<ParameterSet*> ptrs;
  for (auto& m : b.models) ptrs.push_back(&m);
  const BenchmarkReport r = run_prediction_benchmark(b.ds, ptrs);
  const double t = b.train_seconds + seconds_since(t0);
  const auto &deep = r.method("deep"), &forest = r.method("hog_forest"), &mid = r.method("midpoint");
  std::string maes;
  for (double m : deep.maes) maes += (maes.empty() ? "" : ", ") + fmt(m);
  const bool ordered = deep.mean < forest.mean && forest.mean < mid.mean;
  return {ordered && deep.improvement >= 0.15 && t <= 90 * 60,
          "test MAE deep " + fmt(deep.mean) + " [" + maes + "], forest " + fmt(forest.mean) + ", midpoint " +
              fmt(mid.mean) + ", median " + fmt(r.method("median").mean) + "; deep improvement " +
              fmt(100 * deep.improvement, 3) + "%; " + fmt(t / 60, 3) + " min on " +
              std::to_string(std::thread::hardware_concurrency()) + " core(s)"};
}

Outcome generation_agreement(const Settings& s) {
  BenchmarkRun& b = benchmark_models(s, 1);
  ParameterSet& m = b.models.front();
  const GenerationStudy st = run_generation_study(m);
  constexpr int kNullSeeds = 30;
  double null_sum = 0;
  std::vector<double> null_values;
  std::string nulls;
  for (int i = 0; i < kNullSeeds; ++i) {
    GenerationStudyOptions o;
    o.null_arms = true;
    o.seed = 1 + static_cast<std::uint64_t>(i);
    const double a = run_generation_study(m, o).agreement;
    null_sum += a;
    null_values.push_back(a);
    nulls += (nulls.empty() ? "" : ", ") + fmt(a, 3);
  }
  const double null_mean = null_sum / kNullSeeds;
  double ss = 0;
  for (const double a : null_values) ss += (a - null_mean) * (a - null_mean);
  const double null_se = std::sqrt(ss / (kNullSeeds - 1) / kNullSeeds);
  return {st.agreement >= 0.65 && std::abs(null_mean - 0.5) <= 0.05,
          "agreement " + fmt(st.agreement) + " (" + std::to_string(st.high.size()) + "+" +
              std::to_string(st.low.size()) + " designs, " + std::to_string(st.draws) + " draws" +
              (st.relaxed ? ", thresholds relaxed" : "") + "); null mean " + fmt(null_mean) + " (se " + fmt(null_se, 2) + ") over " +
              std::to_string(kNullSeeds) + " seeds [" + nulls + "]"};
}

// Largest frame-to-frame image change over a 9-frame morph, relative to an
// even split of the endpoint difference. Informational.
Outcome morph_smoothness(const Settings& s) {
  BenchmarkRun& b = benchmark_models(s, 1);
  ParameterSet& m = b.models.front();
  const std::size_t K = m.model().embedding_dim;
  Rng rng(99);
  double worst = 0;
  for (int pair = 0; pair < 10; ++pair) {
    std::vector<double> h1(K), h2(K);
    for (auto& v : h1) v = rng.normal();
    for (auto& v : h2) v = rng.normal();
    h1 = project_to_sphere(h1);
    h2 = project_to_sphere(h2);
    std::vector<std::vector<double>> hs;
    for (int i = 0; i < 9; ++i) hs.push_back(slerp(h1, h2, i / 8.0));
    const AttributeAssignment a = {0, 0, 0};
    const GeneratedBatch g = generate_images(m, hs, std::vector<AttributeAssignment>(hs.size(), a));
    const std::size_t per = g.image.size() / hs.size();
    auto dist = [&](std::size_t i, std::size_t j) {
      double d = 0;
      for (std::size_t k = 0; k < per; ++k) d += std::abs(double(g.image[i * per + k]) - double(g.image[j * per + k]));
      return d / static_cast<double>(per);
    };
    const double span = dist(0, 8);
    if (span < 1e-6) continue;
    for (std::size_t i = 0; i + 1 < hs.size(); ++i) worst = std::max(worst, dist(i, i + 1) / (span / 8));
  }
  return {true, "largest step / even step = " + fmt(worst, 3) + " over 10 random pairs (informational)"};
}

// Forks the CLI in serve mode and returns its pid and the first stdout line.
std::pair<pid_t, std::string> spawn_serve(const Settings& s, const fs::path& ck) {
  int fds[2];
  if (pipe(fds) != 0) return {-1, ""};
  const pid_t pid = fork();
  if (pid == 0) {
    dup2(fds[1], STDOUT_FILENO);
    close(fds[0]);
    close(fds[1]);
    const std::string cli = s.cli.string(), ckp = ck.string();
    execl(cli.c_str(), cli.c_str(), "serve", "--checkpoint", ckp.c_str(), "--port", "0", static_cast<char*>(nullptr));
    _exit(127);
  }
  close(fds[1]);
  std::string line;
  char c;
  while (read(fds[0], &c, 1) == 1 && c != '\n') line += c;
  close(fds[0]);
  return {pid, line};
}

Outcome cli_smoke(const Settings& s) {
  const fs::path dir = s.work / "cli-smoke";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const std::string cli = s.cli.string(), d = dir.string();
  std::vector<std::string> failed;
  auto step = [&](const std::string& name, const std::string& args) {
    const int rc = run(cli + " " + args);
    if (rc != 0) failed.push_back(name + " exit " + std::to_string(rc));
  };
  step("make-data", "make-data --out " + d + "/data --rated 40 --unrated 200 --resolution 16");
  step("train", "train --quiet --config " + s.smoke_config.string() + " --data " + d + "/data --out " + d + "/run");
  step("eval", "eval --data " + d + "/data --checkpoint " + d + "/run/checkpoint --out " + d +
                   "/report.json --forest-seeds 1 --null-seeds 2");
  step("generate", "generate --checkpoint " + d + "/run --attrs bodytype=wedge,viewpoint=side,shade=dark --seed 5 --out " +
                       d + "/generated");
  try {
    std::ifstream f(dir / "report.json");
    const json r = json::parse(f);
    if (r.at("format") != "aest-eval-report" || r.at("benchmark").at("methods").size() != 4 ||
        !r.at("generation").contains("agreement"))
      failed.push_back("report missing fields");
  } catch (const std::exception& e) {
    failed.push_back(std::string("report: ") + e.what());
  }
  try {
    const Dataset g = read_dataset(dir / "generated");
    if (g.samples.size() != 1) failed.push_back("generated dataset size");
  } catch (const std::exception& e) {
    failed.push_back(std::string("generated dataset: ") + e.what());
  }
  const auto [pid, line] = spawn_serve(s, dir / "run");
  if (pid <= 0) {
    failed.push_back("serve did not start");
  } else {
    try {
      const std::string url = json::parse(line).at("listening");
      httplib::Client client(url);
      const auto info = client.Get("/api/info");
      if (!info || info->status != 200 || !json::parse(info->body).contains("schema")) failed.push_back("serve /api/info");
      const auto gen = client.Post("/api/generate",
                                   R"({"attributes":{"bodytype":"boxy","viewpoint":"side","shade":"light"},"seed":1})",
                                   "application/json");
      if (!gen || gen->status != 200) failed.push_back("serve /api/generate");
    } catch (const std::exception& e) {
      failed.push_back(std::string("serve: ") + e.what() + " (stdout: " + line + ")");
    }
    kill(pid, SIGTERM);
    int status = 0;
    waitpid(pid, &status, 0);
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) failed.push_back("serve did not exit cleanly");
  }
  std::string detail = "make-data, train, eval, generate, serve";
  for (const auto& f : failed) detail += "; " + f;
  return {failed.empty(), detail};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  Settings s;
  std::vector<std::string> only;
  s.work = fs::temp_directory_path() / ("aest-acceptance-" + std::to_string(::getpid()));
  s.bin_dir = AEST_TEST_BIN_DIR;
  s.cli = AEST_CLI_PATH;
  s.benchmark_config = fs::path(AEST_SOURCE_DIR) / "configs" / "benchmark.json";
  s.smoke_config = fs::path(AEST_SOURCE_DIR) / "configs" / "smoke.json";
  app.add_option("--only", only, "Run only the named criteria");
  app.add_option("--work", s.work, "Scratch directory");
  app.add_option("--bin-dir", s.bin_dir, "Directory holding the unit-test binaries");
  app.add_option("--cli", s.cli, "Path to the aest command");
  app.add_option("--benchmark-config", s.benchmark_config, "Training config for the benchmark models");
  app.add_option("--smoke-config", s.smoke_config, "Training config for the CLI smoke run");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(s.work);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient-suite",
       [&] {
         return doctest_suite(s, {{"test_gradients", ""}, {"test_nets", "full network gradient*"}}, 300);
       }},
      {"kl-elbo-suite",
       [&] { return doctest_suite(s, {{"test_losses", "kl*,Jensen*"}}, 120); }},
      {"oracle-equivalence",
       [&] {
         return doctest_suite(s,
                              {{"test_diffmath", "conv2d*,avg_pool2d*,upsample*,leaky_relu*"},
                               {"test_losses", "predictive loss,reconstruction loss,attribute cross entropy"},
                               {"test_evalbench", "hog*,forest split*,mae*"},
                               {"test_synthdata", "krippendorff*"}},
                              300);
       }},
      {"spectral-bound", spectral_bound},
      {"rater-filter", rater_filter},
      {"determinism-resume", [&] { return determinism(s); }},
      {"cli-smoke", [&] { return cli_smoke(s); }},
      {"prediction-benchmark", [&] { return prediction_benchmark(s); }},
      {"generation-agreement", [&] { return generation_agreement(s); }},
      {"morph-smoothness", [&] { return morph_smoothness(s); }},
  };

  const std::set<std::string> wanted(only.begin(), only.end());
  for (const auto& name : wanted)
    if (std::none_of(criteria.begin(), criteria.end(), [&](const auto& c) { return c.first == name; })) {
      std::cerr << "unknown criterion '" << name << "'\n";
      return 2;
    }
  int failures = 0;
  for (const auto& [name, check] : criteria) {
    if (!wanted.empty() && !wanted.count(name)) continue;
    const auto t0 = Clock::now();
    Outcome o;
    try {
      o = check();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    if (!o.pass) ++failures;
    std::cout << (o.pass ? "PASS " : "FAIL ") << name << ": " << o.detail << " [" << fmt(seconds_since(t0), 4)
              << " s]" << std::endl;
  }
  fs::remove_all(s.work);
  return failures ? 1 : 0;
}
