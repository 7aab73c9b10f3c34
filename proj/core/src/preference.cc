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

#include "sppo/preference.h"

#include <cmath>
#include <string>

#include "sppo/errors.h"

namespace sppo {
namespace {

std::vector<std::size_t> CountsOf(const std::vector<SquareMatrix>& tables) {
  std::vector<std::size_t> counts;
  for (const auto& m : tables) counts.push_back(m.size());
  return counts;
}

// P(j > i) = 1 - P(i > j), diagonal exactly 1/2.
SquareMatrix MirrorUpper(const SquareMatrix& upper) {
  SquareMatrix m = upper;
  for (std::size_t i = 0; i < m.size(); ++i) {
    m(i, i) = 0.5;
    for (std::size_t j = i + 1; j < m.size(); ++j) m(j, i) = 1.0 - m(i, j);
  }
  return m;
}

}  // namespace

const char* OracleKindName(OracleKind kind) {
  switch (kind) {
    case OracleKind::kMatrix:
      return "matrix";
    case OracleKind::kBradleyTerry:
      return "bradley_terry";
    case OracleKind::kRelativeReward:
      return "relative_reward";
  }
  return "unknown";
}

PreferenceOracle PreferenceOracle::FromMatrices(
    std::vector<SquareMatrix> matrices) {
  constexpr double kTol = kConsistencyTolerance;
  for (std::size_t x = 0; x < matrices.size(); ++x) {
    const SquareMatrix& m = matrices[x];
    const std::string where = " (prompt " + std::to_string(x) + ")";
    for (std::size_t i = 0; i < m.size(); ++i) {
      for (std::size_t j = 0; j < m.size(); ++j) {
        if (!(m(i, j) >= 0.0 && m(i, j) <= 1.0)) {
          throw InputError("preference entries must lie in [0, 1]" + where);
        }
        if (std::abs(m(i, j) + m(j, i) - 1.0) > kTol) {
          throw InputError("preference matrix violates M[i][j] + M[j][i] = 1" +
                           where);
        }
      }
    }
  }
  PreferenceOracle oracle;
  oracle.kind_ = OracleKind::kMatrix;
  oracle.universe_ = ResponseUniverse(CountsOf(matrices));
  oracle.probs_ = matrices;
  oracle.tables_ = std::move(matrices);
  oracle.weights_.assign(oracle.universe_.num_prompts(),
                         1.0 / static_cast<double>(oracle.tables_.size()));
  return oracle;
}

PreferenceOracle PreferenceOracle::FromRewards(
    std::vector<std::vector<double>> rewards) {
  PreferenceOracle oracle;
  std::vector<std::size_t> counts;
  for (const auto& row : rewards) {
    for (double r : row) {
      if (!std::isfinite(r)) throw InputError("rewards must be finite");
    }
    counts.push_back(row.size());
    SquareMatrix p(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) {
      for (std::size_t j = i + 1; j < row.size(); ++j) {
        p(i, j) = Sigmoid(row[i] - row[j]);
      }
    }
    oracle.probs_.push_back(MirrorUpper(p));
  }
  oracle.kind_ = OracleKind::kBradleyTerry;
  oracle.universe_ = ResponseUniverse(std::move(counts));
  oracle.rewards_ = std::move(rewards);
  oracle.weights_.assign(oracle.universe_.num_prompts(),
                         1.0 / static_cast<double>(oracle.rewards_.size()));
  return oracle;
}

PreferenceOracle PreferenceOracle::FromRelativeScores(
    std::vector<SquareMatrix> scores) {
  constexpr double kTol = kConsistencyTolerance;
  PreferenceOracle oracle;
  for (std::size_t x = 0; x < scores.size(); ++x) {
    const SquareMatrix& s = scores[x];
    const std::string where = " (prompt " + std::to_string(x) + ")";
    SquareMatrix p(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
      for (std::size_t j = 0; j < s.size(); ++j) {
        if (!std::isfinite(s(i, j))) {
          throw InputError("relative scores must be finite" + where);
        }
        if (std::abs(s(i, j) + s(j, i)) > kTol) {
          throw InputError("relative scores must be antisymmetric" + where);
        }
      }
      for (std::size_t j = i + 1; j < s.size(); ++j) {
        p(i, j) = Sigmoid(s(i, j));
      }
    }
    oracle.probs_.push_back(MirrorUpper(p));
  }
  oracle.kind_ = OracleKind::kRelativeReward;
  oracle.universe_ = ResponseUniverse(CountsOf(scores));
  oracle.tables_ = std::move(scores);
  oracle.weights_.assign(oracle.universe_.num_prompts(),
                         1.0 / static_cast<double>(oracle.tables_.size()));
  return oracle;
}

PreferenceOracle PreferenceOracle::RelativeFromRewards(
    const std::vector<std::vector<double>>& rewards) {
  std::vector<SquareMatrix> scores;
  for (const auto& row : rewards) {
    SquareMatrix s(row.size());
    for (std::size_t i = 0; i < row.size(); ++i) {
      for (std::size_t j = i + 1; j < row.size(); ++j) {
        s(i, j) = row[i] - row[j];
        s(j, i) = -s(i, j);
      }
    }
    scores.push_back(std::move(s));
  }
  return FromRelativeScores(std::move(scores));
}

void PreferenceOracle::CheckIds(PromptId x, ResponseId y, ResponseId y2) const {
  const std::size_t n = universe_.num_responses(x);
  if (y >= n || y2 >= n) {
    throw InputError("response id out of range for prompt " +
                     std::to_string(x.index));
  }
}

double PreferenceOracle::Prob(PromptId x, ResponseId y, ResponseId y2) const {
  CheckIds(x, y, y2);
  return probs_[x.index](y, y2);
}

double PreferenceOracle::RelativeScore(PromptId x, ResponseId y,
                                       ResponseId y2) const {
  if (kind_ != OracleKind::kRelativeReward) {
    throw UnsupportedOperationError(
        std::string("relative scores are not defined for a ") +
        OracleKindName(kind_) + " oracle");
  }
  CheckIds(x, y, y2);
  return tables_[x.index](y, y2);
}

double PreferenceOracle::Reward(PromptId x, ResponseId y) const {
  if (kind_ != OracleKind::kBradleyTerry) {
    throw UnsupportedOperationError(
        std::string("rewards are not defined for a ") + OracleKindName(kind_) +
        " oracle");
  }
  CheckIds(x, y, y);
  return rewards_[x.index][y];
}

const SquareMatrix& PreferenceOracle::Matrix(PromptId x) const {
  universe_.num_responses(x);
  return probs_[x.index];
}

PreferenceOracle PreferenceOracle::WithPromptWeights(
    std::vector<double> weights) const {
  if (weights.size() != num_prompts()) {
    throw InputError("prompt weights need one entry per prompt");
  }
  CompensatedSum total;
  for (double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InputError("prompt weights must be finite and >= 0");
    }
    total.Add(w);
  }
  if (!(total.value() > 0.0)) throw InputError("prompt weights sum to zero");
  for (double& w : weights) w /= total.value();
  PreferenceOracle copy = *this;
  copy.weights_ = std::move(weights);
  return copy;
}

PreferenceOracle PreferenceOracle::WithUniverse(
    ResponseUniverse universe) const {
  if (!(universe == universe_)) {
    throw InputError("universe does not match the oracle's response counts");
  }
  PreferenceOracle copy = *this;
  copy.universe_ = std::move(universe);
  return copy;
}

double RelativeRewardProb(double score) {
  if (!std::isfinite(score)) {
    throw InputError("relative reward score must be finite");
  }
  return Sigmoid(score);
}

std::vector<double> WinRatesAgainst(const PreferenceOracle& oracle, PromptId x,
                                    std::span<const double> opponent) {
  const SquareMatrix& m = oracle.Matrix(x);
  if (opponent.size() != m.size()) {
    throw InputError("opponent row does not match the response universe");
  }
  std::vector<double> rates(m.size());
  for (std::size_t y = 0; y < m.size(); ++y) {
    CompensatedSum sum;
    for (std::size_t y2 = 0; y2 < m.size(); ++y2) {
      if (opponent[y2] != 0.0) sum.Add(opponent[y2] * m(y, y2));
    }
    rates[y] = sum.value();
  }
  return rates;
}

double WinRateVsPolicy(const PreferenceOracle& oracle, PromptId x, ResponseId y,
                       const TabularPolicy& pi) {
  if (pi.num_prompts() != oracle.num_prompts() ||
      pi.num_responses(x) != oracle.num_responses(x)) {
    throw InputError("policy does not match the oracle's response universe");
  }
  const std::vector<double> row = pi.Row(x);
  const SquareMatrix& m = oracle.Matrix(x);
  if (y >= m.size()) throw InputError("response id out of range");
  CompensatedSum sum;
  for (std::size_t y2 = 0; y2 < row.size(); ++y2) sum.Add(row[y2] * m(y, y2));
  return sum.value();
}

double PolicyVsPolicy(const PreferenceOracle& oracle, PromptId x,
                      const TabularPolicy& pi, const TabularPolicy& pi2) {
  const std::vector<double> p = pi.Row(x);
  const std::vector<double> q = pi2.Row(x);
  const SquareMatrix& m = oracle.Matrix(x);
  if (p.size() != m.size() || q.size() != m.size()) {
    throw InputError("policies do not match the oracle's response universe");
  }
  CompensatedSum sum;
  for (std::size_t y = 0; y < p.size(); ++y) {
    if (p[y] == 0.0) continue;
    for (std::size_t y2 = 0; y2 < q.size(); ++y2) {
      sum.Add(p[y] * q[y2] * m(y, y2));
    }
  }
  return sum.value();
}

double PolicyVsPolicy(const PreferenceOracle& oracle, const TabularPolicy& pi,
                      const TabularPolicy& pi2) {
  if (!pi.SameShape(pi2) || pi.num_prompts() != oracle.num_prompts()) {
    throw InputError("policies do not share the oracle's response universe");
  }
  CompensatedSum sum;
  const auto& w = oracle.prompt_weights();
  for (std::size_t x = 0; x < oracle.num_prompts(); ++x) {
    if (w[x] == 0.0) continue;
    sum.Add(w[x] * PolicyVsPolicy(oracle, PromptId(x), pi, pi2));
  }
  return sum.value();
}

WinRateEstimate EmpiricalWinRate(const PreferenceOracle& oracle, PromptId x,
                                 ResponseId y,
                                 std::span<const ResponseId> samples) {
  if (samples.empty()) {
    throw InputError("empirical win rate needs at least one sample");
  }
  CompensatedSum sum;
  for (ResponseId yk : samples) sum.Add(oracle.Prob(x, y, yk));
  WinRateEstimate estimate;
  estimate.value = sum.value() / static_cast<double>(samples.size());
  estimate.k = samples.size();
  estimate.sample_ids.assign(samples.begin(), samples.end());
  return estimate;
}

double PairRmScore(const PreferenceOracle& oracle, PromptId x, ResponseId y,
                   std::span<const ResponseId> samples) {
  if (oracle.kind() != OracleKind::kRelativeReward) {
    throw UnsupportedOperationError(
        std::string("PairRM scores need a relative_reward oracle, got ") +
        OracleKindName(oracle.kind()));
  }
  if (samples.empty()) throw InputError("PairRM score needs at least one sample");
  CompensatedSum sum;
  for (ResponseId yk : samples) sum.Add(oracle.RelativeScore(x, y, yk));
  return sum.value() / static_cast<double>(samples.size());
}

WinnerLoser SelectWinnerLoser(std::span<const double> scores) {
  if (scores.size() < 2) {
    throw InputError("winner/loser selection needs at least two scores");
  }
  WinnerLoser result;
  for (std::size_t i = 1; i < scores.size(); ++i) {
    if (scores[i] > scores[result.winner]) result.winner = i;
    if (scores[i] < scores[result.loser]) result.loser = i;
  }
  if (result.winner == result.loser) result = {0, 1};
  return result;
}

}  // namespace sppo
