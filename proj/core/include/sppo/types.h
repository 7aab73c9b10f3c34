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

#ifndef SPPO_TYPES_H_
#define SPPO_TYPES_H_

#include <compare>
#include <cstddef>

namespace sppo {

// Index of a prompt x in the synthetic prompt set.
struct PromptId {
  std::size_t index = 0;

  constexpr PromptId() = default;
  constexpr explicit PromptId(std::size_t i) : index(i) {}

  friend constexpr auto operator<=>(const PromptId&, const PromptId&) = default;
};

// Responses are opaque ids 0..n-1 within a prompt.
using ResponseId = std::size_t;

}  // namespace sppo

#endif  // SPPO_TYPES_H_
