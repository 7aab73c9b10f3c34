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

#ifndef SPPO_RNG_H_
#define SPPO_RNG_H_

#include <cstdint>

namespace sppo {

// Counter-based generator: every draw is a pure function of (seed, key), so
// results do not depend on evaluation order or thread schedule. Keys are
// typically (iteration, prompt, draw index).
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t Bits(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                     std::uint64_t d = 0) const;

  // Uniform double in [0, 1) with 53 random bits.
  double Uniform(std::uint64_t a, std::uint64_t b = 0, std::uint64_t c = 0,
                 std::uint64_t d = 0) const;

 private:
  std::uint64_t seed_;
};

}  // namespace sppo

#endif  // SPPO_RNG_H_
