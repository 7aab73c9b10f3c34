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

#include "sppo/games.h"

#include <cmath>
#include <numbers>

#include "sppo/rng.h"

namespace sppo {
namespace {

// Box-Muller on two keyed uniforms.
double StandardNormal(const CounterRng& rng, std::uint64_t a, std::uint64_t b,
                      std::uint64_t c) {
  const double u1 = 1.0 - rng.Uniform(a, b, c, 0);
  const double u2 = rng.Uniform(a, b, c, 1);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace

PreferenceOracle RandomMatrixOracle(std::size_t prompts, std::size_t responses,
                                    std::uint64_t seed) {
  const CounterRng rng(seed);
  std::vector<SquareMatrix> matrices;
  for (std::size_t x = 0; x < prompts; ++x) {
    SquareMatrix m(responses, 0.5);
    for (std::size_t i = 0; i < responses; ++i) {
      for (std::size_t j = i + 1; j < responses; ++j) {
        m(i, j) = rng.Uniform(x, i, j);
        m(j, i) = 1.0 - m(i, j);
      }
    }
    matrices.push_back(std::move(m));
  }
  return PreferenceOracle::FromMatrices(std::move(matrices));
}

PreferenceOracle RandomBradleyTerryOracle(std::size_t prompts,
                                          std::size_t responses,
                                          std::uint64_t seed, double scale) {
  const CounterRng rng(seed);
  std::vector<std::vector<double>> rewards(prompts,
                                           std::vector<double>(responses));
  for (std::size_t x = 0; x < prompts; ++x) {
    for (std::size_t y = 0; y < responses; ++y) {
      rewards[x][y] = scale * StandardNormal(rng, x, y, 7);
    }
  }
  return PreferenceOracle::FromRewards(std::move(rewards));
}

PreferenceOracle RockPaperScissors(std::size_t prompts) {
  // 0 = rock, 1 = paper, 2 = scissors.
  SquareMatrix m(3, 0.5);
  m(1, 0) = 1.0;
  m(0, 1) = 0.0;
  m(2, 1) = 1.0;
  m(1, 2) = 0.0;
  m(0, 2) = 1.0;
  m(2, 0) = 0.0;
  return PreferenceOracle::FromMatrices(std::vector<SquareMatrix>(prompts, m));
}

PreferenceOracle AllTieOracle(const ResponseUniverse& universe) {
  std::vector<SquareMatrix> matrices;
  for (std::size_t n : universe.counts()) matrices.emplace_back(n, 0.5);
  return PreferenceOracle::FromMatrices(std::move(matrices));
}

TabularPolicy RandomPolicy(const ResponseUniverse& universe, std::uint64_t seed,
                           double scale) {
  const CounterRng rng(seed);
  std::vector<std::vector<double>> logits;
  for (std::size_t x = 0; x < universe.num_prompts(); ++x) {
    std::vector<double> row(universe.counts()[x]);
    for (std::size_t y = 0; y < row.size(); ++y) {
      row[y] = scale * StandardNormal(rng, x, y, 11);
    }
    logits.push_back(std::move(row));
  }
  return TabularPolicy::FromLogWeights(std::move(logits));
}

}  // namespace sppo
