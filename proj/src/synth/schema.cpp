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

#include "aest/synth/schema.hpp"

#include <set>

#include "../json_util.hpp"
#include "aest/errors.hpp"

namespace aest::inline AEST_PREC {

AttributeSchema::AttributeSchema(std::vector<Attribute> attributes) : attributes_(std::move(attributes)) {
  require(!attributes_.empty(), "attribute schema needs at least one attribute");
  std::set<std::string> names;
  for (const auto& a : attributes_) {
    require(names.insert(a.name).second, "duplicate attribute name '" + a.name + "'");
    require(a.levels.size() >= 2, "attribute '" + a.name + "' needs at least two levels");
    std::set<std::string> levels(a.levels.begin(), a.levels.end());
    require(levels.size() == a.levels.size(), "attribute '" + a.name + "' has duplicate level names");
  }
}

AttributeSchema AttributeSchema::default_schema() {
  return AttributeSchema({{"bodytype", {"boxy", "wedge", "rounded"}},
                          {"viewpoint", {"side", "three-quarter"}},
                          {"shade", {"light", "mid", "dark"}}});
}

std::size_t AttributeSchema::total_levels() const {
  std::size_t n = 0;
  for (const auto& a : attributes_) n += a.levels.size();
  return n;
}

std::size_t AttributeSchema::offset(std::size_t c) const {
  std::size_t n = 0;
  for (std::size_t i = 0; i < c; ++i) n += attributes_.at(i).levels.size();
  return n;
}

std::optional<std::size_t> AttributeSchema::find(const std::string& name) const {
  for (std::size_t c = 0; c < attributes_.size(); ++c)
    if (attributes_[c].name == name) return c;
  return std::nullopt;
}

std::size_t AttributeSchema::index_of(const std::string& name) const {
  auto c = find(name);
  require(c.has_value(), "unknown attribute '" + name + "'");
  return *c;
}

std::size_t AttributeSchema::level_index(std::size_t c, const std::string& level) const {
  const auto& levels = attributes_.at(c).levels;
  for (std::size_t l = 0; l < levels.size(); ++l)
    if (levels[l] == level) return l;
  contract_fail("unknown level '" + level + "' for attribute '" + attributes_[c].name + "'");
}

void AttributeSchema::validate(const AttributeAssignment& a) const {
  require(a.size() == attributes_.size(), "attribute assignment has " + std::to_string(a.size()) +
                                              " entries, schema has " + std::to_string(attributes_.size()));
  for (std::size_t c = 0; c < a.size(); ++c)
    require(a[c] < attributes_[c].levels.size(),
            "level index " + std::to_string(a[c]) + " out of range for attribute '" + attributes_[c].name + "'");
}

std::vector<real> AttributeSchema::one_hot(const AttributeAssignment& a) const {
  validate(a);
  std::vector<real> v(total_levels(), real(0));
  for (std::size_t c = 0; c < a.size(); ++c) v[offset(c) + a[c]] = real(1);
  return v;
}

}  // namespace aest::inline AEST_PREC

namespace aest::inline AEST_PREC {

nlohmann::json schema_json(const AttributeSchema& schema) {
  nlohmann::json attrs = nlohmann::json::array();
  for (const auto& a : schema.attributes()) attrs.push_back({{"name", a.name}, {"levels", a.levels}});
  return attrs;
}

AttributeSchema schema_from_json(const nlohmann::json& j) {
  std::vector<Attribute> attrs;
  for (const auto& a : j)
    attrs.push_back({a.at("name").get<std::string>(), a.at("levels").get<std::vector<std::string>>()});
  return AttributeSchema(std::move(attrs));
}

}  // namespace aest::inline AEST_PREC
