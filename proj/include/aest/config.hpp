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

// The core library is compiled twice: 32-bit floats for training and serving,
// 64-bit for gradient and oracle checks. Each precision lives in its own
// inline namespace so both can be linked into one binary.
#ifdef AEST_DOUBLE
#define AEST_PREC f64
#else
#define AEST_PREC f32
#endif

namespace aest::inline AEST_PREC {

#ifdef AEST_DOUBLE
using real = double;
#else
using real = float;
#endif

}  // namespace aest::inline AEST_PREC
