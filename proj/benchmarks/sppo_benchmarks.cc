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

#include "benchmark/benchmark.h"
#include "sppo/exact_solver.h"
#include "sppo/games.h"
#include "sppo/losses.h"
#include "sppo/token_mdp.h"

namespace sppo {
namespace {

void BM_ExponentialUpdate(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto oracle = RandomMatrixOracle(10, n, 1);
  const auto pi = RandomPolicy(oracle.universe(), 2);
  for (auto _ : state) {
    benchmark::DoNotOptimize(ExponentialUpdate(pi, oracle, 0.5));
  }
}
BENCHMARK(BM_ExponentialUpdate)->Arg(8)->Arg(64)->Arg(256);

void BM_SoftBackup(benchmark::State& state) {
  const auto mdp = TokenMdp::Random(4, static_cast<int>(state.range(0)), 1.0, 3);
  for (auto _ : state) {
    benchmark::DoNotOptimize(SoftBackup(mdp));
  }
}
BENCHMARK(BM_SoftBackup)->Arg(4)->Arg(6)->Arg(8);

void BM_SppoObjective(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto oracle = RandomMatrixOracle(10, n, 4);
  const auto pi_t = RandomPolicy(oracle.universe(), 5);
  const auto theta = SoftmaxPolicy::FromPolicy(RandomPolicy(oracle.universe(), 6));
  const auto data = ExactDataset(pi_t, oracle);
  const auto target = RegressionTarget::ConstantBaseline(1.0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(SppoObjective(theta, pi_t, data, target));
  }
}
BENCHMARK(BM_SppoObjective)->Arg(8)->Arg(64)->Arg(256);

}  // namespace
}  // namespace sppo

BENCHMARK_MAIN();
