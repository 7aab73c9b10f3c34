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

// Synthetic game generators shared by tests, benchmarks and the CLI.

#ifndef SPPO_GAMES_H_
#define SPPO_GAMES_H_

#include <cstddef>
#include <cstdint>

#include "sppo/policy.h"
#include "sppo/preference.h"

namespace sppo {

// Upper triangle i.i.d. uniform in [0, 1], mirrored; generically intransitive.
PreferenceOracle RandomMatrixOracle(std::size_t prompts, std::size_t responses,
                                    std::uint64_t seed);

// Rewards i.i.d. standard normal scaled by `scale`.
PreferenceOracle RandomBradleyTerryOracle(std::size_t prompts,
                                          std::size_t responses,
                                          std::uint64_t seed,
                                          double scale = 1.0);

// Deterministic cyclic preference over {rock, paper, scissors}: paper beats
// rock, scissors beats paper, rock beats scissors, each with probability 1.
PreferenceOracle RockPaperScissors(std::size_t prompts = 1);

// Every pairwise probability equal to 1/2.
PreferenceOracle AllTieOracle(const ResponseUniverse& universe);

// softmax of N(0, scale^2) logits; fully supported.
TabularPolicy RandomPolicy(const ResponseUniverse& universe, std::uint64_t seed,
                           double scale = 1.0);

}  // namespace sppo

#endif  // SPPO_GAMES_H_
