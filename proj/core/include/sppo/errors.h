// Copyright 2026 The SPPO Lab Authors.
//
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

#ifndef SPPO_ERRORS_H_
#define SPPO_ERRORS_H_

#include <stdexcept>
#include <string>

namespace sppo {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or out-of-range arguments, bad files, violated preconditions.
class InputError : public Error {
 public:
  using Error::Error;
};

// A mathematically undefined quantity, e.g. KL with a support violation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// A request that would exceed a configured size cap.
class ResourceError : public Error {
 public:
  using Error::Error;
};

// The operation is not defined for this variant (e.g. relative scores on a
// Bradley-Terry oracle).
class UnsupportedOperationError : public Error {
 public:
  using Error::Error;
};

// A checked mathematical invariant failed at run time.
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace sppo

#endif  // SPPO_ERRORS_H_
