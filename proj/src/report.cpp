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

#include <cmath>
#include <numeric>

#include "aest/evalbench.hpp"
#include "aest/service.hpp"
#include "aest/train.hpp"
#include "json.hpp"

namespace aest::inline AEST_PREC {

using nlohmann::json;

namespace {

json method_json(const MethodResult& m) {
  json j = {{"name", m.name}, {"mae_mean", m.mean}, {"maes", m.maes}, {"improvement", m.improvement}};
  j["mae_std"] = m.stddev ? json(*m.stddev) : json(nullptr);
  return j;
}

json designs_json(const std::vector<StudyDesign>& ds) {
  json out = json::array();
  for (const auto& d : ds) out.push_back({{"predicted", d.predicted}, {"oracle", d.oracle}, {"fit_iou", d.fit_iou}});
  return out;
}

}  // namespace

std::string evaluation_report(const Dataset& ds, const std::vector<std::filesystem::path>& checkpoints,
                              const EvaluationOptions& o) {
  std::vector<std::shared_ptr<const LoadedModel>> models;
  std::vector<ParameterSet*> params;
  json ckjson = json::array();
  for (const auto& path : checkpoints) {
    auto m = load_model(path);
    require(m->params.schema() == ds.schema, "checkpoint " + path.string() + " was trained on a different schema");
    ckjson.push_back({{"path", m->source.string()},
                      {"id", m->id},
                      {"step", m->step},
                      {"config", json::parse(train_config_to_json(m->config))}});
    params.push_back(const_cast<ParameterSet*>(&m->params));
    models.push_back(std::move(m));
  }

  BenchmarkOptions bo;
  bo.forest_seeds = o.forest_seeds;
  const BenchmarkReport br = run_prediction_benchmark(ds, params, bo);
  json methods = json::array();
  for (const auto& m : br.methods) methods.push_back(method_json(m));
  json notes = br.notes;

  json report = {{"format", "aest-eval-report"},
                 {"version", 1},
                 {"dataset", {{"path", o.dataset_label}, {"samples", ds.samples.size()}, {"rated", ds.rated_count()}}},
                 {"checkpoints", ckjson},
                 {"evaluation",
                  {{"forest_seeds", o.forest_seeds},
                   {"forest_trees", bo.forest.n_trees},
                   {"generation", o.generation},
                   {"study_seed", o.study_seed},
                   {"null_seeds", o.null_seeds},
                   {"max_draws", o.max_draws}}},
                 {"benchmark", {{"test_items", br.test_items}, {"partial", br.partial}, {"methods", methods}}}};

  if (o.generation && !params.empty()) {
    GenerationStudyOptions go;
    go.seed = o.study_seed;
    go.max_draws = o.max_draws;
    const GenerationStudy st = run_generation_study(*params.front(), go);
    std::vector<double> nulls;
    for (std::size_t s = 0; s < o.null_seeds; ++s) {
      GenerationStudyOptions no = go;
      no.null_arms = true;
      no.seed = o.study_seed + 1 + s;
      nulls.push_back(run_generation_study(*params.front(), no).agreement);
    }
    json condition = json::object();
    for (const auto& [k, v] : go.condition) condition[k] = v;
    json gen = {{"agreement", st.agreement},
                {"n_per_arm", go.n_per_arm},
                {"condition", condition},
                {"threshold_high", st.threshold_high},
                {"threshold_low", st.threshold_low},
                {"draws", st.draws},
                {"relaxed", st.relaxed},
                {"high", designs_json(st.high)},
                {"low", designs_json(st.low)}};
    if (!nulls.empty())
      gen["null"] = {{"agreements", nulls},
                     {"mean", std::accumulate(nulls.begin(), nulls.end(), 0.0) / static_cast<double>(nulls.size())}};
    report["generation"] = std::move(gen);
    notes.push_back("generated designs are scored as sampled; no manual morphing toward plausibility is applied");
  } else if (o.generation) {
    notes.push_back("generation study skipped: no trained model supplied");
  }
  report["notes"] = std::move(notes);
  return report.dump(2);
}

}  // namespace aest::inline AEST_PREC
