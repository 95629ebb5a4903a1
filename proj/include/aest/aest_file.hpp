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

#include <cstdint>
#include <filesystem>

#include "aest/tensor.hpp"

namespace aest::inline AEST_PREC {

// AEST tensor file: "AEST", u8 version (1), u8 dtype, u32 ndim, ndim x u32
// dims, row-major payload. All integers little-endian.
enum class FileDType : std::uint8_t { f32 = 0, u8 = 1 };

inline constexpr std::uint8_t kAestVersion = 1;

void write_tensor(const std::filesystem::path& path, const Tensor& t, FileDType dtype = FileDType::f32);
Tensor read_tensor(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_tensor(const Tensor& t, FileDType dtype);
// `origin` names the source in error messages.
Tensor decode_tensor(const std::vector<std::uint8_t>& bytes, const std::string& origin);

}  // namespace aest::inline AEST_PREC
