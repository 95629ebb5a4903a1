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

#include <filesystem>
#include <memory>
#include <mutex>
#include <string>

#include "aest/errors.hpp"
#include "aest/train.hpp"

namespace aest::inline AEST_PREC {

enum class ApiCode { bad_request, not_found, model_unloaded, internal };
const char* api_code_name(ApiCode code);
int api_http_status(ApiCode code);

class ApiError : public Error {
 public:
  ApiError(ApiCode code, const std::string& what) : Error(what), code_(code) {}
  ApiCode code() const { return code_; }

 private:
  ApiCode code_;
};

// An immutable checkpoint snapshot. Inference only reads the parameters, so
// one snapshot may serve concurrent requests.
struct LoadedModel {
  ParameterSet params;
  TrainConfig config;
  std::string id;
  long step = 0;
  std::filesystem::path source;
};

// Accepts a checkpoint directory, its checkpoint.json, or a training output
// directory holding checkpoint/.
std::filesystem::path resolve_checkpoint(const std::filesystem::path& path);
std::shared_ptr<const LoadedModel> load_model(const std::filesystem::path& path);

struct ApiResponse {
  int status = 200;
  std::string body;  // JSON; errors are {"error": {"code", "message"}}
};

// JSON request handlers over a snapshot. They throw ApiError.
std::string api_info(const LoadedModel& m);
std::string api_generate(const LoadedModel& m, const std::string& body);
std::string api_morph(const LoadedModel& m, const std::string& body);
std::string api_encode(const LoadedModel& m, const std::string& body);
std::string api_predict(const LoadedModel& m, const std::string& body);

// Routes requests to the current snapshot. load() swaps snapshots atomically;
// requests already running finish on the snapshot they started with.
class Service {
 public:
  void load(const std::filesystem::path& checkpoint);
  void unload();
  std::shared_ptr<const LoadedModel> snapshot() const;

  ApiResponse handle(const std::string& method, const std::string& path, const std::string& body) const;

 private:
  mutable std::mutex mu_;
  std::shared_ptr<const LoadedModel> model_;
};

std::string api_error_body(ApiCode code, const std::string& message);

}  // namespace aest::inline AEST_PREC
