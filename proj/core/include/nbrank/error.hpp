// Copyright 2026 The nbrank Authors
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef NBRANK_ERROR_HPP_
#define NBRANK_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace nbrank {

// Invalid arguments or flag combinations supplied by the caller.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed, inconsistent, or exhausted input data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A selection problem that cannot be solved as posed.
class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace nbrank

#endif  // NBRANK_ERROR_HPP_
