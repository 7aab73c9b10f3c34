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

// Token-level maximum-entropy RL on a fixed-horizon token MDP.
//
// States are prefixes s_h = (x, y_1..y_{h-1}); the action appends one token.
// A state at depth d (0 <= d <= H) is the base-V number formed by its d
// tokens, first token most significant, so the child of state s under token a
// is s * V + a. Complete sequences are the V^H states at depth H, and carry a
// terminal reward r(y; x). Soft optimal values follow
//
//   V*(s_{H+1}) = r(y; x)
//   Q*(s_h, a)  = eta^-1 log pi_ref(a | s_h) + V*(s_{h+1})
//   V*(s_h)     = eta^-1 log sum_a exp(eta Q*(s_h, a))
//
// and the optimal token policy is eta^-1 log pi* = Q* - V*.

#ifndef SPPO_TOKEN_MDP_H_
#define SPPO_TOKEN_MDP_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace sppo {

class TokenMdp {
 public:
  static constexpr std::size_t kDefaultStateCap = 1'000'000;

  // `log_ref[d]` holds V^d rows of V log-probabilities, state-major.
  TokenMdp(int vocab, int horizon, double eta,
           std::vector<std::vector<double>> log_ref,
           std::vector<double> rewards,
           std::size_t sequence_cap = kDefaultStateCap);

  static TokenMdp UniformReference(int vocab, int horizon, double eta,
                                   std::vector<double> rewards,
                                   std::size_t sequence_cap = kDefaultStateCap);
  // Softmax-of-normal reference rows and uniform [0, 1) rewards.
  static TokenMdp Random(int vocab, int horizon, double eta, std::uint64_t seed,
                         std::size_t sequence_cap = kDefaultStateCap);

  int vocab() const { return vocab_; }
  int horizon() const { return horizon_; }
  double eta() const { return eta_; }
  std::size_t num_states(int depth) const { return level_size_[depth]; }
  std::size_t num_sequences() const { return level_size_[horizon_]; }

  double LogRef(int depth, std::size_t state, int action) const {
    return log_ref_[depth][state * vocab_ + action];
  }
  const std::vector<std::vector<double>>& log_ref() const { return log_ref_; }
  double Reward(std::size_t sequence) const { return rewards_[sequence]; }
  const std::vector<double>& rewards() const { return rewards_; }

  std::size_t SequenceIndex(std::span<const int> tokens) const;
  std::vector<int> SequenceTokens(std::size_t sequence) const;
  // log pi_ref(y | x) = sum_h log pi_ref(a_h | s_h).
  double SequenceLogRef(std::size_t sequence) const;

  TokenMdp WithRewards(std::vector<double> rewards) const;
  TokenMdp WithRewardShift(double shift) const;

 private:
  int vocab_;
  int horizon_;
  double eta_;
  std::vector<std::size_t> level_size_;
  std::vector<std::vector<double>> log_ref_;
  std::vector<double> rewards_;
};

struct SoftValueTables {
  // q[d][s * V + a] for d < H.
  std::vector<std::vector<double>> q;
  // v[d][s] for d <= H; v[H] are the terminal rewards.
  std::vector<std::vector<double>> v;

  double InitialValue() const { return v[0][0]; }
};

// Exact backward induction over the prefix tree.
SoftValueTables SoftBackup(const TokenMdp& mdp);

// Largest |V*(s) - eta^-1 log sum_a exp(eta Q*(s, a))| over all states.
double BackupConsistency(const TokenMdp& mdp, const SoftValueTables& tables);

// Relative deviation between exp(eta V*(s_1)) and the enumerated sum
// sum_y pi_ref(y|x) exp(eta r(y; x)), divided by max(1, |sum|).
double VerifyValueIdentity(const TokenMdp& mdp, const SoftValueTables& tables);

// Token-level policy: per-depth log-probability rows, same layout as
// TokenMdp::log_ref().
class TokenPolicy {
 public:
  TokenPolicy(int vocab, std::vector<std::vector<double>> log_rows);

  int vocab() const { return vocab_; }
  int horizon() const { return static_cast<int>(log_rows_.size()); }
  double LogProb(int depth, std::size_t state, int action) const {
    return log_rows_[depth][state * vocab_ + action];
  }
  const std::vector<std::vector<double>>& log_rows() const { return log_rows_; }
  double SequenceLogProb(std::size_t sequence) const;
  // Largest |sum_a pi(a|s) - 1| over all states.
  double MaxRowDeviation() const;

 private:
  int vocab_;
  std::vector<std::vector<double>> log_rows_;
};

// log pi*(a|s) = eta (Q*(s, a) - V*(s)).
TokenPolicy OptimalTokenPolicy(const TokenMdp& mdp,
                               const SoftValueTables& tables);

// Largest |prod_h pi(a_h|s_h) - pi_ref(y|x) exp(eta r) / Z| over complete
// sequences, Z by enumeration.
double SequenceEquivalence(const TokenMdp& mdp, const TokenPolicy& policy);

// sigmoid(eta^-1 sum_h log(pi*/pi_ref)(y_w) - eta^-1 sum_h log(pi*/pi_ref)(y_l)).
double TokenBtPreference(const TokenMdp& mdp, const SoftValueTables& tables,
                         std::span<const int> winner,
                         std::span<const int> loser);

// Token logits with the same layout as the reference rows, stored flat.
class TokenSoftmaxPolicy {
 public:
  TokenSoftmaxPolicy(int vocab, int horizon, std::vector<double> params);
  static TokenSoftmaxPolicy FromPolicy(const TokenPolicy& policy);

  int vocab() const { return vocab_; }
  int horizon() const { return horizon_; }
  const std::vector<double>& params() const { return params_; }
  std::size_t depth_offset(int depth) const { return offsets_[depth]; }
  TokenPolicy Realize() const;

 private:
  int vocab_;
  int horizon_;
  std::vector<double> params_;
  std::vector<std::size_t> offsets_;
};

struct TokenLossReport {
  double loss = 0.0;
  std::vector<double> gradient;
};

// E_{y ~ pi_ref}(sum_h log(pi_theta(a_h|s_h) / pi*(a_h|s_h)))^2 by enumeration,
// where the MDP's reference policy plays the role of the sampling policy pi_t
// and its rewards are win rates. Gradient is w.r.t. the token logits.
TokenLossReport SppoTokenLoss(const TokenSoftmaxPolicy& theta,
                              const TokenMdp& mdp, const TokenPolicy& optimal);

}  // namespace sppo

#endif  // SPPO_TOKEN_MDP_H_
