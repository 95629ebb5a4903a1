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

#pragma once

#include <optional>
#include <string>
#include <vector>

#include "aest/tensor.hpp"

namespace aest::inline AEST_PREC {

struct Attribute {
  std::string name;
  std::vector<std::string> levels;
};

// One level index per schema attribute.
using AttributeAssignment = std::vector<std::size_t>;

// C named categorical attributes with l_c levels each.
class AttributeSchema {
 public:
  AttributeSchema() = default;
  explicit AttributeSchema(std::vector<Attribute> attributes);

  // bodytype {boxy, wedge, rounded}, viewpoint {side, three-quarter},
  // shade {light, mid, dark}.
  static AttributeSchema default_schema();

  std::size_t size() const { return attributes_.size(); }
  const Attribute& operator[](std::size_t c) const { return attributes_.at(c); }
  const std::vector<Attribute>& attributes() const { return attributes_; }

  // Sum of l_c: the width of a concatenated one-hot encoding.
  std::size_t total_levels() const;
  // Column where attribute c starts in the concatenated encoding.
  std::size_t offset(std::size_t c) const;

  std::optional<std::size_t> find(const std::string& name) const;
  std::size_t index_of(const std::string& name) const;
  std::size_t level_index(std::size_t c, const std::string& level) const;

  void validate(const AttributeAssignment& a) const;
  // Concatenated one-hot vector of length total_levels().
  std::vector<real> one_hot(const AttributeAssignment& a) const;

  friend bool operator==(const AttributeSchema&, const AttributeSchema&) = default;

 private:
  std::vector<Attribute> attributes_;
};

inline bool operator==(const Attribute& a, const Attribute& b) {
  return a.name == b.name && a.levels == b.levels;
}

}  // namespace aest::inline AEST_PREC
