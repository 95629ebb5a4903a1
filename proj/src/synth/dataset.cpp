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

#include "aest/synth/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <numeric>
#include <set>

#include "aest/aest_file.hpp"
#include "aest/errors.hpp"
#include "aest/rng.hpp"
#include "json.hpp"
#include "../json_util.hpp"

namespace aest::inline AEST_PREC {

namespace fs = std::filesystem;
using nlohmann::json;

std::size_t Dataset::rated_count() const {
  return static_cast<std::size_t>(
      std::count_if(samples.begin(), samples.end(), [](const ImageSample& s) { return s.rated(); }));
}

Dataset Dataset::subset(Split split) const {
  Dataset out{schema, {}};
  for (const auto& s : samples)
    if (s.split == split) out.samples.push_back(s);
  return out;
}

Dataset build_dataset(std::size_t n_rated_designs, std::size_t n_unrated, int n_raters, std::uint64_t seed,
                      const DatasetOptions& options, RaterSummary* summary) {
  require(n_rated_designs > 0 && n_unrated > 0 && n_raters > 0, "build_dataset: counts must be positive");
  Dataset ds;
  ds.schema = AttributeSchema::default_schema();
  const std::size_t c_body = ds.schema.index_of("bodytype");
  const std::size_t c_view = ds.schema.index_of("viewpoint");
  const std::size_t c_shade = ds.schema.index_of("shade");
  Rng rng(Rng::mix(seed, 0xDA7A));

  struct RatedDesign {
    std::uint64_t seed;
    AttributeAssignment attrs;
    ShapeParams params;
  };
  std::vector<RatedDesign> designs;
  std::vector<double> truth;
  for (std::size_t d = 0; d < n_rated_designs; ++d) {
    RatedDesign rd;
    rd.seed = Rng::mix(seed, d);
    rd.attrs.assign(ds.schema.size(), 0);
    rd.attrs[c_body] = rng.index(3);
    rd.attrs[c_shade] = rng.index(3);
    rd.params = draw_params(rd.seed, rd.attrs[c_body]);
    truth.push_back(oracle_rating(rd.params));
    designs.push_back(rd);
  }

  const auto records = simulate_raters(truth, n_raters, options.inconsistent_fraction, Rng::mix(seed, 0x4A7E),
                                       options.raters);
  auto filtered = filter_raters(records, options.alpha_cutoff);
  require(!filtered.kept.empty(), "build_dataset: every rater was filtered out");

  const std::size_t n_views = ds.schema[c_view].levels.size();
  for (std::size_t d = 0; d < designs.size(); ++d) {
    double mean = 0;
    for (const auto& r : filtered.kept) mean += r.ratings[d];
    mean /= static_cast<double>(filtered.kept.size());
    const real rating = static_cast<real>(static_cast<float>(mean));
    for (std::size_t v = 0; v < n_views; ++v) {
      AttributeAssignment a = designs[d].attrs;
      a[c_view] = v;
      Design g = generate_design(designs[d].seed, ds.schema, a, designs[d].params,
                                 {options.resolution, 1, 4});
      g.sample.id = "r" + std::to_string(d) + "_v" + std::to_string(v);
      g.sample.rating = rating;
      g.sample.group = static_cast<std::int64_t>(d);
      ds.samples.push_back(std::move(g.sample));
    }
  }

  for (std::size_t u = 0; u < n_unrated; ++u) {
    AttributeAssignment a(ds.schema.size());
    for (std::size_t c = 0; c < a.size(); ++c) a[c] = rng.index(ds.schema[c].levels.size());
    Design g = generate_design(Rng::mix(seed, 1'000'000'000ULL + u), ds.schema, a, std::nullopt,
                               {options.resolution, 3, 4});
    g.sample.id = "u" + std::to_string(u);
    g.sample.group = static_cast<std::int64_t>(n_rated_designs + u);
    ds.samples.push_back(std::move(g.sample));
  }
  if (summary) *summary = {filtered.kept.size(), filtered.dropped.size(), std::move(filtered)};
  return ds;
}

void assign_splits(Dataset& ds, std::uint64_t seed) {
  require(!ds.samples.empty(), "split_dataset: empty dataset");
  std::set<std::int64_t> rated_groups, all_groups;
  for (const auto& s : ds.samples) {
    all_groups.insert(s.group);
    if (s.rated()) rated_groups.insert(s.group);
  }
  require(all_groups.size() >= 4, "split_dataset: need at least 4 groups, got " + std::to_string(all_groups.size()));
  std::vector<std::int64_t> rated(rated_groups.begin(), rated_groups.end()), unrated;
  for (auto g : all_groups)
    if (!rated_groups.count(g)) unrated.push_back(g);
  Rng rng(Rng::mix(seed, 0x5B1));
  auto shuffle = [&](std::vector<std::int64_t>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.index(i)]);
  };
  shuffle(rated);
  shuffle(unrated);
  static constexpr Split pattern[] = {Split::train, Split::val, Split::train, Split::test};
  std::map<std::int64_t, Split> assignment;
  std::size_t k = 0;
  for (auto g : rated) assignment[g] = pattern[k++ % 4];
  for (auto g : unrated) assignment[g] = pattern[k++ % 4];
  for (auto& s : ds.samples) s.split = assignment.at(s.group);
}

SplitResult split_dataset(const Dataset& ds, std::uint64_t seed) {
  Dataset tagged = ds;
  assign_splits(tagged, seed);
  return {tagged.subset(Split::train), tagged.subset(Split::val), tagged.subset(Split::test)};
}


void write_dataset(const fs::path& dir, const Dataset& ds) {
  fs::create_directories(dir / "tensors");
  json samples = json::array();
  for (const auto& s : ds.samples) {
    const std::string image_file = "tensors/" + s.id + ".aest";
    const std::string mask_file = "tensors/" + s.id + "_mask.aest";
    write_tensor(dir / image_file, s.image, FileDType::f32);
    write_tensor(dir / mask_file, s.mask, FileDType::u8);
    json attrs = json::object();
    for (std::size_t c = 0; c < ds.schema.size(); ++c) attrs[ds.schema[c].name] = ds.schema[c].levels.at(s.attributes.at(c));
    json rec = {{"id", s.id},     {"image", image_file}, {"mask", mask_file}, {"attributes", attrs},
                {"group", s.group}, {"split", split_name(s.split)}};
    if (s.rating) rec["rating"] = static_cast<double>(*s.rating);
    if (s.design)
      rec["design"] = {{"aspect", s.design->aspect},       {"roundness", s.design->roundness},
                       {"beltline", s.design->beltline},   {"wheel", s.design->wheel},
                       {"greenhouse", s.design->greenhouse}};
    samples.push_back(std::move(rec));
  }
  json manifest = {{"format", "aest-dataset"}, {"version", 1}, {"schema", schema_json(ds.schema)}, {"samples", samples}};
  std::ofstream f(dir / "manifest.json");
  if (!f) throw Error("cannot write " + (dir / "manifest.json").string());
  f << manifest.dump(1) << "\n";
}

Dataset read_dataset(const fs::path& dir) {
  const fs::path mpath = dir / "manifest.json";
  std::ifstream f(mpath);
  if (!f) throw FormatError("missing manifest " + mpath.string());
  json manifest;
  try {
    manifest = json::parse(f);
  } catch (const json::parse_error& e) {
    throw FormatError(mpath.string() + ": invalid JSON at byte offset " + std::to_string(e.byte));
  }
  try {
    if (manifest.at("format") != "aest-dataset") throw FormatError(mpath.string() + ": not an aest-dataset manifest");
    if (manifest.at("version") != 1) throw FormatError(mpath.string() + ": unsupported manifest version");
    Dataset ds;
    ds.schema = schema_from_json(manifest.at("schema"));
    for (const auto& rec : manifest.at("samples")) {
      ImageSample s;
      s.id = rec.at("id").get<std::string>();
      for (const char* key : {"image", "mask"}) {
        const fs::path p = dir / rec.at(key).get<std::string>();
        if (!fs::exists(p)) throw FormatError("manifest references missing tensor file " + p.string());
      }
      s.image = read_tensor(dir / rec.at("image").get<std::string>());
      s.mask = read_tensor(dir / rec.at("mask").get<std::string>());
      if (s.image.rank() != 3 || s.mask.rank() != 3 || s.mask.dim(0) != 1 || s.image.dim(1) != s.mask.dim(1) ||
          s.image.dim(2) != s.mask.dim(2))
        throw FormatError("sample " + s.id + ": image/mask shapes disagree");
      const auto& attrs = rec.at("attributes");
      for (std::size_t c = 0; c < ds.schema.size(); ++c)
        s.attributes.push_back(ds.schema.level_index(c, attrs.at(ds.schema[c].name).get<std::string>()));
      if (rec.contains("rating")) s.rating = static_cast<real>(rec.at("rating").get<double>());
      s.group = rec.at("group").get<std::int64_t>();
      s.split = parse_split(rec.value("split", std::string("none")));
      if (rec.contains("design")) {
        const auto& d = rec.at("design");
        s.design = ShapeParams{d.at("aspect").get<double>(), d.at("roundness").get<double>(),
                               d.at("beltline").get<double>(), d.at("wheel").get<double>(),
                               d.at("greenhouse").get<double>()};
      }
      ds.samples.push_back(std::move(s));
    }
    return ds;
  } catch (const json::exception& e) {
    throw FormatError(mpath.string() + ": malformed manifest (" + e.what() + ")");
  } catch (const ContractViolation& e) {
    throw FormatError(mpath.string() + ": " + e.what());
  }
}

}  // namespace aest::inline AEST_PREC
