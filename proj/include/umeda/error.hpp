//
// Copyright 2026 The UMEDA Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#pragma once

#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>

namespace umeda {

// Runtime failure inside a numerical routine or the federation loop.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Rejected input: bad configuration value, malformed file, wrong shape.
class ValidationError : public Error {
 public:
  using Error::Error;
};

namespace internal {

template <typename... Args>
std::string StrCat(Args&&... args) {
  std::ostringstream oss;
  oss.precision(17);
  (oss << ... << std::forward<Args>(args));
  return oss.str();
}

}  // namespace internal

}  // namespace umeda
