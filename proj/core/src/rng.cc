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

#include "sppo/rng.h"

namespace sppo {
namespace {

constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;

// splitmix64 finaliser.
std::uint64_t Mix(std::uint64_t z) {
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace

std::uint64_t CounterRng::Bits(std::uint64_t a, std::uint64_t b,
                               std::uint64_t c, std::uint64_t d) const {
  std::uint64_t h = Mix(seed_ + kGolden);
  h = Mix(h ^ (a + kGolden));
  h = Mix(h ^ (b + 2 * kGolden));
  h = Mix(h ^ (c + 3 * kGolden));
  h = Mix(h ^ (d + 4 * kGolden));
  return h;
}

double CounterRng::Uniform(std::uint64_t a, std::uint64_t b, std::uint64_t c,
                           std::uint64_t d) const {
  return static_cast<double>(Bits(a, b, c, d) >> 11) * 0x1.0p-53;
}

}  // namespace sppo
