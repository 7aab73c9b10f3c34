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

// Preference oracles P(y > y' | x) and the win-rate quantities built on them.

#ifndef SPPO_PREFERENCE_H_
#define SPPO_PREFERENCE_H_

#include <cstddef>
#include <span>
#include <vector>

#include "sppo/numeric.h"
#include "sppo/policy.h"
#include "sppo/types.h"

namespace sppo {

enum class OracleKind { kMatrix, kBradleyTerry, kRelativeReward };

const char* OracleKindName(OracleKind kind);

// Source of pairwise preference probabilities. Three variants:
//  - matrix: M[i][j] = P(y_i > y_j | x), possibly intransitive;
//  - Bradley-Terry: P = sigmoid(r(y) - r(y'));
//  - relative reward: P = sigmoid(s(y, y')), s antisymmetric.
// The full probability matrix of every prompt is cached at construction.
class PreferenceOracle {
 public:
  // Rejects |M[i][j] + M[j][i] - 1| > kConsistencyTolerance.
  static constexpr double kConsistencyTolerance = 1e-12;

  static PreferenceOracle FromMatrices(std::vector<SquareMatrix> matrices);
  static PreferenceOracle FromRewards(std::vector<std::vector<double>> rewards);
  static PreferenceOracle FromRelativeScores(std::vector<SquareMatrix> scores);
  // Relative-reward oracle whose scores are reward differences, i.e. the
  // Bradley-Terry game seen through a pairwise scorer.
  static PreferenceOracle RelativeFromRewards(
      const std::vector<std::vector<double>>& rewards);

  OracleKind kind() const { return kind_; }
  const ResponseUniverse& universe() const { return universe_; }
  std::size_t num_prompts() const { return universe_.num_prompts(); }
  std::size_t num_responses(PromptId x) const {
    return universe_.num_responses(x);
  }

  // P(y > y2 | x).
  double Prob(PromptId x, ResponseId y, ResponseId y2) const;
  // s(y, y2; x); relative-reward oracles only.
  double RelativeScore(PromptId x, ResponseId y, ResponseId y2) const;
  // r(y; x); Bradley-Terry oracles only.
  double Reward(PromptId x, ResponseId y) const;

  const SquareMatrix& Matrix(PromptId x) const;
  // Raw stored tables: matrices, score matrices, or one reward row each.
  const std::vector<SquareMatrix>& tables() const { return tables_; }
  const std::vector<std::vector<double>>& rewards() const { return rewards_; }

  // Prompt distribution; uniform unless overridden.
  const std::vector<double>& prompt_weights() const { return weights_; }
  PreferenceOracle WithPromptWeights(std::vector<double> weights) const;
  PreferenceOracle WithUniverse(ResponseUniverse universe) const;

 private:
  PreferenceOracle() = default;
  void CheckIds(PromptId x, ResponseId y, ResponseId y2) const;

  OracleKind kind_ = OracleKind::kMatrix;
  ResponseUniverse universe_;
  std::vector<SquareMatrix> tables_;
  std::vector<std::vector<double>> rewards_;
  std::vector<SquareMatrix> probs_;
  std::vector<double> weights_;
};

// sigmoid(s); rejects non-finite scores.
double RelativeRewardProb(double score);

// P(y > pi | x) = sum_y' pi(y'|x) P(y > y'|x).
double WinRateVsPolicy(const PreferenceOracle& oracle, PromptId x, ResponseId y,
                       const TabularPolicy& pi);
// P(y > pi | x) for every y, given pi(.|x) as a probability row.
std::vector<double> WinRatesAgainst(const PreferenceOracle& oracle, PromptId x,
                                    std::span<const double> opponent);

double PolicyVsPolicy(const PreferenceOracle& oracle, PromptId x,
                      const TabularPolicy& pi, const TabularPolicy& pi2);
// E_x P(pi > pi2 | x) under the oracle's prompt weights.
double PolicyVsPolicy(const PreferenceOracle& oracle, const TabularPolicy& pi,
                      const TabularPolicy& pi2);

struct WinRateEstimate {
  double value = 0.5;
  std::size_t k = 0;
  std::vector<ResponseId> sample_ids;
};

// (1/K) sum_k P(y > y_k | x). A sample equal to y contributes its self-tie 1/2.
WinRateEstimate EmpiricalWinRate(const PreferenceOracle& oracle, PromptId x,
                                 ResponseId y,
                                 std::span<const ResponseId> samples);

// (1/K) sum_k s(y, y_k; x); relative-reward oracles only.
double PairRmScore(const PreferenceOracle& oracle, PromptId x, ResponseId y,
                   std::span<const ResponseId> samples);

struct WinnerLoser {
  std::size_t winner = 0;
  std::size_t loser = 0;
};

// argmax / argmin with lowest-index tie-breaking. When every score is equal
// the result is (0, 1).
WinnerLoser SelectWinnerLoser(std::span<const double> scores);

}  // namespace sppo

#endif  // SPPO_PREFERENCE_H_
