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

#include <stdexcept>
#include <string>

#include "aest/config.hpp"

namespace aest::inline AEST_PREC {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A caller broke an operation's precondition (shape, range, count).
class ContractViolation : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated on-disk data.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Training produced non-finite values; `term` names the loss term at fault.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& term, const std::string& what)
      : Error(what), term_(term) {}
  const std::string& term() const { return term_; }

 private:
  std::string term_;
};

class InternalError : public Error {
 public:
  using Error::Error;
};

[[noreturn]] inline void contract_fail(const std::string& what) {
  throw ContractViolation(what);
}

inline void require(bool ok, const std::string& what) {
  if (!ok) contract_fail(what);
}

}  // namespace aest::inline AEST_PREC
