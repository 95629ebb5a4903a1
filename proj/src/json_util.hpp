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
// JSON helpers shared by the manifest, checkpoint and service code.

#include "aest/synth/schema.hpp"
#include "json.hpp"

namespace aest::inline AEST_PREC {

nlohmann::json schema_json(const AttributeSchema& schema);
AttributeSchema schema_from_json(const nlohmann::json& j);

}  // namespace aest::inline AEST_PREC
