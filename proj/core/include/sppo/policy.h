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

// Policy representations: tabular distributions over a finite response
// universe (stored as log-probabilities), softmax-parameterised policies, and
// uniform mixtures of policy snapshots.

#ifndef SPPO_POLICY_H_
#define SPPO_POLICY_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "sppo/types.h"

namespace sppo {

// Number of responses available for each prompt, plus optional token
// sequences for each response.
class ResponseUniverse {
 public:
  ResponseUniverse() = default;
  explicit ResponseUniverse(std::vector<std::size_t> counts);

  std::size_t num_prompts() const { return counts_.size(); }
  std::size_t num_responses(PromptId x) const;
  const std::vector<std::size_t>& counts() const { return counts_; }

  bool has_tokens() const { return !tokens_.empty(); }
  // tokens[x][y] is the token sequence of response y for prompt x.
  void set_tokens(std::vector<std::vector<std::vector<int>>> tokens);
  const std::vector<int>& tokens(PromptId x, ResponseId y) const;

  friend bool operator==(const ResponseUniverse& a, const ResponseUniverse& b) {
    return a.counts_ == b.counts_;
  }

 private:
  std::vector<std::size_t> counts_;
  std::vector<std::vector<std::vector<int>>> tokens_;
};

// pi(y|x) for every prompt. Rows are kept in log space so that probabilities
// far below the double underflow threshold keep their support.
class TabularPolicy {
 public:
  // Tolerance on |sum(row) - 1| accepted at construction.
  static constexpr double kRowTolerance = 1e-12;

  TabularPolicy() = default;

  static TabularPolicy FromProbabilities(
      const std::vector<std::vector<double>>& rows);
  static TabularPolicy FromLogProbabilities(
      std::vector<std::vector<double>> log_rows);
  // Normalises each row of unnormalised log-weights.
  static TabularPolicy FromLogWeights(std::vector<std::vector<double>> weights);
  static TabularPolicy Uniform(const ResponseUniverse& universe);
  static TabularPolicy PointMass(const ResponseUniverse& universe,
                                 const std::vector<ResponseId>& choice);

  std::size_t num_prompts() const { return log_rows_.size(); }
  std::size_t num_responses(PromptId x) const;
  ResponseUniverse universe() const;

  double Prob(PromptId x, ResponseId y) const;
  double LogProb(PromptId x, ResponseId y) const;
  std::span<const double> LogRow(PromptId x) const;
  std::vector<double> Row(PromptId x) const;
  const std::vector<std::vector<double>>& log_rows() const { return log_rows_; }

  bool SameShape(const TabularPolicy& other) const;
  bool FullySupported() const;

  friend bool operator==(const TabularPolicy&, const TabularPolicy&) = default;

 private:
  explicit TabularPolicy(std::vector<std::vector<double>> log_rows)
      : log_rows_(std::move(log_rows)) {}

  std::vector<std::vector<double>> log_rows_;
};

// Per-prompt logits theta(.|x); the induced policy is softmax(theta).
// Parameters are stored flat (prompt-major) so optimisers can treat them as a
// single vector.
class SoftmaxPolicy {
 public:
  SoftmaxPolicy() = default;
  explicit SoftmaxPolicy(const std::vector<std::vector<double>>& logits);
  // Logits equal to log pi; requires full support.
  static SoftmaxPolicy FromPolicy(const TabularPolicy& pi);
  // Same layout as `like`, new flat parameter values.
  static SoftmaxPolicy WithParams(const SoftmaxPolicy& like,
                                  std::vector<double> params);

  std::size_t num_prompts() const { return offsets_.size() - 1; }
  std::size_t num_responses(PromptId x) const;
  std::size_t offset(PromptId x) const { return offsets_[x.index]; }

  std::span<const double> Logits(PromptId x) const;
  const std::vector<double>& params() const { return params_; }

  // log softmax of one row.
  std::vector<double> LogProbs(PromptId x) const;
  TabularPolicy Realize() const;

 private:
  std::vector<double> params_;
  std::vector<std::size_t> offsets_{0};
};

TabularPolicy SoftmaxRealize(const SoftmaxPolicy& policy);

// Uniform mixture (1/T) sum_t pi_t of policy snapshots.
class MixturePolicy {
 public:
  explicit MixturePolicy(std::vector<TabularPolicy> members);

  std::size_t size() const { return members_.size(); }
  const std::vector<TabularPolicy>& members() const { return members_; }

  double Eval(PromptId x, ResponseId y) const;
  TabularPolicy Materialize() const;

 private:
  std::vector<TabularPolicy> members_;
};

// KL(p || q) for probability rows. Throws DomainError when p puts mass
// outside the support of q (the divergence is infinite).
double KlDivergence(std::span<const double> p, std::span<const double> q);
// Same, from log-probability rows.
double KlDivergenceLog(std::span<const double> log_p,
                       std::span<const double> log_q);

// Keys a batch of draws; the draw index is appended per sample.
struct SampleKey {
  std::uint64_t seed = 0;
  std::uint64_t iteration = 0;
};

// k i.i.d. draws from pi(.|x) by inverse CDF on the materialised row.
std::vector<ResponseId> SampleResponses(const TabularPolicy& pi, PromptId x,
                                        std::size_t k, const SampleKey& key);

}  // namespace sppo

#endif  // SPPO_POLICY_H_
