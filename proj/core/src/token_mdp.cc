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

#include "sppo/token_mdp.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "sppo/errors.h"
#include "sppo/numeric.h"
#include "sppo/rng.h"

namespace sppo {
namespace {

std::vector<std::size_t> LevelSizes(int vocab, int horizon, std::size_t cap) {
  if (vocab < 1) throw InputError("vocabulary size must be >= 1");
  if (horizon < 1) throw InputError("horizon must be >= 1");
  std::vector<std::size_t> sizes(horizon + 1, 1);
  for (int d = 1; d <= horizon; ++d) {
    if (sizes[d - 1] > cap / static_cast<std::size_t>(vocab)) {
      throw ResourceError("token MDP has more than " + std::to_string(cap) +
                          " complete sequences");
    }
    sizes[d] = sizes[d - 1] * vocab;
  }
  return sizes;
}

void CheckLogRows(int vocab, std::span<const double> rows) {
  for (std::size_t off = 0; off < rows.size(); off += vocab) {
    const auto row = rows.subspan(off, vocab);
    for (double v : row) {
      if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
        throw InputError("log-probabilities must be finite or -inf");
      }
    }
    if (std::abs(std::expm1(LogSumExp(row))) > 1e-12) {
      throw InputError("token policy row does not sum to one");
    }
  }
}

template <typename LogProbFn>
double PathLogProb(int vocab, int horizon, std::size_t sequence,
                   const LogProbFn& log_prob) {
  std::vector<int> tokens(horizon);
  for (int d = horizon - 1; d >= 0; --d) {
    tokens[d] = static_cast<int>(sequence % vocab);
    sequence /= vocab;
  }
  double sum = 0.0;
  std::size_t state = 0;
  for (int d = 0; d < horizon; ++d) {
    sum += log_prob(d, state, tokens[d]);
    state = state * vocab + tokens[d];
  }
  return sum;
}

std::vector<double> LogSoftmax(std::span<const double> logits) {
  const double lse = LogSumExp(logits);
  std::vector<double> out(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) out[i] = logits[i] - lse;
  return out;
}

}  // namespace

TokenMdp::TokenMdp(int vocab, int horizon, double eta,
                   std::vector<std::vector<double>> log_ref,
                   std::vector<double> rewards, std::size_t sequence_cap)
    : vocab_(vocab),
      horizon_(horizon),
      eta_(eta),
      level_size_(LevelSizes(vocab, horizon, sequence_cap)),
      log_ref_(std::move(log_ref)),
      rewards_(std::move(rewards)) {
  if (!std::isfinite(eta) || eta <= 0.0) {
    throw InputError("eta must be finite and positive");
  }
  if (log_ref_.size() != static_cast<std::size_t>(horizon)) {
    throw InputError("reference policy needs one table per depth");
  }
  for (int d = 0; d < horizon; ++d) {
    if (log_ref_[d].size() != level_size_[d] * vocab) {
      throw InputError("reference table at depth " + std::to_string(d) +
                       " has the wrong size");
    }
    CheckLogRows(vocab, log_ref_[d]);
  }
  if (rewards_.size() != level_size_[horizon]) {
    throw InputError("reward table must have one entry per complete sequence");
  }
  for (double r : rewards_) {
    if (!std::isfinite(r)) throw InputError("rewards must be finite");
  }
}

TokenMdp TokenMdp::UniformReference(int vocab, int horizon, double eta,
                                    std::vector<double> rewards,
                                    std::size_t sequence_cap) {
  const auto sizes = LevelSizes(vocab, horizon, sequence_cap);
  std::vector<std::vector<double>> log_ref(horizon);
  for (int d = 0; d < horizon; ++d) {
    log_ref[d].assign(sizes[d] * vocab, -std::log(static_cast<double>(vocab)));
  }
  return TokenMdp(vocab, horizon, eta, std::move(log_ref), std::move(rewards),
                  sequence_cap);
}

TokenMdp TokenMdp::Random(int vocab, int horizon, double eta,
                          std::uint64_t seed, std::size_t sequence_cap) {
  const auto sizes = LevelSizes(vocab, horizon, sequence_cap);
  const CounterRng rng(seed);
  std::vector<std::vector<double>> log_ref(horizon);
  for (int d = 0; d < horizon; ++d) {
    log_ref[d].resize(sizes[d] * vocab);
    for (std::size_t s = 0; s < sizes[d]; ++s) {
      std::vector<double> logits(vocab);
      for (int a = 0; a < vocab; ++a) {
        const double u1 = 1.0 - rng.Uniform(d, s, a, 1);
        const double u2 = rng.Uniform(d, s, a, 2);
        logits[a] = std::sqrt(-2.0 * std::log(u1)) *
                    std::cos(2.0 * std::numbers::pi * u2);
      }
      const auto row = LogSoftmax(logits);
      std::copy(row.begin(), row.end(), log_ref[d].begin() + s * vocab);
    }
  }
  std::vector<double> rewards(sizes[horizon]);
  for (std::size_t y = 0; y < rewards.size(); ++y) {
    rewards[y] = rng.Uniform(y, 0, 0, 3);
  }
  return TokenMdp(vocab, horizon, eta, std::move(log_ref), std::move(rewards),
                  sequence_cap);
}

std::size_t TokenMdp::SequenceIndex(std::span<const int> tokens) const {
  if (tokens.size() != static_cast<std::size_t>(horizon_)) {
    throw InputError("sequence length must equal the horizon");
  }
  std::size_t index = 0;
  for (int a : tokens) {
    if (a < 0 || a >= vocab_) throw InputError("token outside the vocabulary");
    index = index * vocab_ + a;
  }
  return index;
}

std::vector<int> TokenMdp::SequenceTokens(std::size_t sequence) const {
  if (sequence >= num_sequences()) throw InputError("sequence index out of range");
  std::vector<int> tokens(horizon_);
  for (int d = horizon_ - 1; d >= 0; --d) {
    tokens[d] = static_cast<int>(sequence % vocab_);
    sequence /= vocab_;
  }
  return tokens;
}

double TokenMdp::SequenceLogRef(std::size_t sequence) const {
  return PathLogProb(vocab_, horizon_, sequence,
                     [this](int d, std::size_t s, int a) {
                       return LogRef(d, s, a);
                     });
}

TokenMdp TokenMdp::WithRewards(std::vector<double> rewards) const {
  return TokenMdp(vocab_, horizon_, eta_, log_ref_, std::move(rewards),
                  num_sequences());
}

TokenMdp TokenMdp::WithRewardShift(double shift) const {
  std::vector<double> shifted = rewards_;
  for (double& r : shifted) r += shift;
  return WithRewards(std::move(shifted));
}

SoftValueTables SoftBackup(const TokenMdp& mdp) {
  const int vocab = mdp.vocab();
  const int horizon = mdp.horizon();
  const double eta = mdp.eta();
  SoftValueTables tables;
  tables.q.resize(horizon);
  tables.v.resize(horizon + 1);
  tables.v[horizon] = mdp.rewards();
  std::vector<double> scaled(vocab);
  for (int d = horizon - 1; d >= 0; --d) {
    const std::size_t states = mdp.num_states(d);
    tables.q[d].resize(states * vocab);
    tables.v[d].resize(states);
    for (std::size_t s = 0; s < states; ++s) {
      for (int a = 0; a < vocab; ++a) {
        const double q =
            mdp.LogRef(d, s, a) / eta + tables.v[d + 1][s * vocab + a];
        tables.q[d][s * vocab + a] = q;
        scaled[a] = eta * q;
      }
      tables.v[d][s] = LogSumExp(scaled) / eta;
    }
  }
  return tables;
}

double BackupConsistency(const TokenMdp& mdp, const SoftValueTables& tables) {
  const int vocab = mdp.vocab();
  const double eta = mdp.eta();
  double worst = MaxAbsDifference(tables.v[mdp.horizon()], mdp.rewards());
  std::vector<double> scaled(vocab);
  for (int d = 0; d < mdp.horizon(); ++d) {
    for (std::size_t s = 0; s < mdp.num_states(d); ++s) {
      for (int a = 0; a < vocab; ++a) {
        scaled[a] = eta * tables.q[d][s * vocab + a];
      }
      worst = std::max(worst,
                       std::abs(tables.v[d][s] - LogSumExp(scaled) / eta));
    }
  }
  return worst;
}

namespace {

// log sum_y pi_ref(y|x) exp(eta r(y; x)) by enumeration.
double EnumeratedLogPartition(const TokenMdp& mdp) {
  std::vector<double> terms(mdp.num_sequences());
  for (std::size_t y = 0; y < terms.size(); ++y) {
    terms[y] = mdp.SequenceLogRef(y) + mdp.eta() * mdp.Reward(y);
  }
  return LogSumExp(terms);
}

}  // namespace

double VerifyValueIdentity(const TokenMdp& mdp, const SoftValueTables& tables) {
  const double log_sum = EnumeratedLogPartition(mdp);
  const double sum = std::exp(log_sum);
  // |exp(a) - exp(b)| = exp(b) |expm1(a - b)|.
  const double diff =
      std::abs(std::expm1(mdp.eta() * tables.InitialValue() - log_sum));
  return diff * sum / std::max(1.0, sum);
}

TokenPolicy::TokenPolicy(int vocab, std::vector<std::vector<double>> log_rows)
    : vocab_(vocab), log_rows_(std::move(log_rows)) {
  if (vocab < 1) throw InputError("vocabulary size must be >= 1");
  if (log_rows_.empty()) throw InputError("token policy needs >= 1 depth");
  std::size_t expected = static_cast<std::size_t>(vocab);
  for (const auto& rows : log_rows_) {
    if (rows.size() != expected) {
      throw InputError("token policy table has the wrong size");
    }
    for (double v : rows) {
      if (std::isnan(v)) throw InputError("token log-probability is NaN");
    }
    expected *= vocab;
  }
}

double TokenPolicy::SequenceLogProb(std::size_t sequence) const {
  return PathLogProb(vocab_, horizon(), sequence,
                     [this](int d, std::size_t s, int a) {
                       return LogProb(d, s, a);
                     });
}

double TokenPolicy::MaxRowDeviation() const {
  double worst = 0.0;
  for (const auto& rows : log_rows_) {
    for (std::size_t off = 0; off < rows.size(); off += vocab_) {
      CompensatedSum sum;
      for (int a = 0; a < vocab_; ++a) sum.Add(std::exp(rows[off + a]));
      worst = std::max(worst, std::abs(sum.value() - 1.0));
    }
  }
  return worst;
}

TokenPolicy OptimalTokenPolicy(const TokenMdp& mdp,
                               const SoftValueTables& tables) {
  const int vocab = mdp.vocab();
  std::vector<std::vector<double>> rows(mdp.horizon());
  for (int d = 0; d < mdp.horizon(); ++d) {
    rows[d].resize(tables.q[d].size());
    for (std::size_t s = 0; s < mdp.num_states(d); ++s) {
      for (int a = 0; a < vocab; ++a) {
        rows[d][s * vocab + a] =
            mdp.eta() * (tables.q[d][s * vocab + a] - tables.v[d][s]);
      }
    }
  }
  return TokenPolicy(vocab, std::move(rows));
}

double SequenceEquivalence(const TokenMdp& mdp, const TokenPolicy& policy) {
  if (policy.vocab() != mdp.vocab() || policy.horizon() != mdp.horizon()) {
    throw InputError("token policy and MDP disagree on shape");
  }
  const double log_z = EnumeratedLogPartition(mdp);
  double worst = 0.0;
  for (std::size_t y = 0; y < mdp.num_sequences(); ++y) {
    const double target =
        std::exp(mdp.SequenceLogRef(y) + mdp.eta() * mdp.Reward(y) - log_z);
    worst = std::max(worst, std::abs(std::exp(policy.SequenceLogProb(y)) - target));
  }
  return worst;
}

double TokenBtPreference(const TokenMdp& mdp, const SoftValueTables& tables,
                         std::span<const int> winner,
                         std::span<const int> loser) {
  const int vocab = mdp.vocab();
  const auto log_ratio = [&](std::span<const int> tokens) {
    mdp.SequenceIndex(tokens);  // validates
    double sum = 0.0;
    std::size_t state = 0;
    for (int d = 0; d < mdp.horizon(); ++d) {
      const int a = tokens[d];
      const double log_opt =
          mdp.eta() * (tables.q[d][state * vocab + a] - tables.v[d][state]);
      sum += log_opt - mdp.LogRef(d, state, a);
      state = state * vocab + a;
    }
    return sum;
  };
  return Sigmoid((log_ratio(winner) - log_ratio(loser)) / mdp.eta());
}

TokenSoftmaxPolicy::TokenSoftmaxPolicy(int vocab, int horizon,
                                       std::vector<double> params)
    : vocab_(vocab), horizon_(horizon), params_(std::move(params)) {
  if (vocab < 1 || horizon < 1) {
    throw InputError("vocabulary and horizon must be >= 1");
  }
  offsets_.assign(horizon + 1, 0);
  std::size_t width = static_cast<std::size_t>(vocab);
  for (int d = 0; d < horizon; ++d) {
    offsets_[d + 1] = offsets_[d] + width;
    width *= vocab;
  }
  if (params_.size() != offsets_[horizon]) {
    throw InputError("token logits have the wrong size");
  }
  for (double p : params_) {
    if (!std::isfinite(p)) throw InputError("token logits must be finite");
  }
}

TokenSoftmaxPolicy TokenSoftmaxPolicy::FromPolicy(const TokenPolicy& policy) {
  std::vector<double> params;
  for (const auto& rows : policy.log_rows()) {
    params.insert(params.end(), rows.begin(), rows.end());
  }
  return TokenSoftmaxPolicy(policy.vocab(), policy.horizon(), std::move(params));
}

TokenPolicy TokenSoftmaxPolicy::Realize() const {
  std::vector<std::vector<double>> rows(horizon_);
  for (int d = 0; d < horizon_; ++d) {
    const std::span<const double> block(params_.data() + offsets_[d],
                                        offsets_[d + 1] - offsets_[d]);
    rows[d].resize(block.size());
    for (std::size_t off = 0; off < block.size(); off += vocab_) {
      const auto row = LogSoftmax(block.subspan(off, vocab_));
      std::copy(row.begin(), row.end(), rows[d].begin() + off);
    }
  }
  return TokenPolicy(vocab_, std::move(rows));
}

TokenLossReport SppoTokenLoss(const TokenSoftmaxPolicy& theta,
                              const TokenMdp& mdp, const TokenPolicy& optimal) {
  const int vocab = mdp.vocab();
  const int horizon = mdp.horizon();
  if (theta.vocab() != vocab || theta.horizon() != horizon ||
      optimal.vocab() != vocab || optimal.horizon() != horizon) {
    throw InputError("token policies and MDP disagree on shape");
  }
  const TokenPolicy current = theta.Realize();
  TokenLossReport report;
  report.gradient.assign(theta.params().size(), 0.0);
  CompensatedSum loss;
  std::vector<std::size_t> states(horizon);
  for (std::size_t y = 0; y < mdp.num_sequences(); ++y) {
    const double weight = std::exp(mdp.SequenceLogRef(y));
    if (weight == 0.0) continue;
    const std::vector<int> tokens = mdp.SequenceTokens(y);
    double gap = 0.0;
    std::size_t state = 0;
    for (int d = 0; d < horizon; ++d) {
      states[d] = state;
      gap += current.LogProb(d, state, tokens[d]) -
             optimal.LogProb(d, state, tokens[d]);
      state = state * vocab + tokens[d];
    }
    loss.Add(weight * gap * gap);
    const double coeff = 2.0 * weight * gap;
    for (int d = 0; d < horizon; ++d) {
      const std::size_t off = theta.depth_offset(d) + states[d] * vocab;
      for (int j = 0; j < vocab; ++j) {
        const double p = std::exp(current.LogProb(d, states[d], j));
        report.gradient[off + j] +=
            coeff * ((j == tokens[d] ? 1.0 : 0.0) - p);
      }
    }
  }
  report.loss = loss.value();
  return report;
}

}  // namespace sppo
