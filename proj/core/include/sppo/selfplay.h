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

// The iterative self-play loop: sample K responses per prompt from pi_t,
// annotate them with the preference oracle, select training examples, fit
// pi_{t+1}, and evaluate. Also the method comparison and the estimation
// batch-size ablation built on top of it.

#ifndef SPPO_SELFPLAY_H_
#define SPPO_SELFPLAY_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sppo/dataset.h"
#include "sppo/losses.h"
#include "sppo/numeric.h"
#include "sppo/policy.h"
#include "sppo/preference.h"

namespace sppo {

enum class GenerationMode {
  // Draw K responses per prompt from pi_t.
  kSampled,
  // Use every response with exact win rates and pi_t weights (K -> infinity).
  kExact,
};

enum class SplitPlan {
  // Prompts dealt round-robin into `iterations` disjoint portions; iteration t
  // trains on portion t only.
  kRoundRobin,
  kNone,
};

enum class FeedbackMode {
  // Annotate with P(y > y') itself.
  kProbability,
  // Annotate with a Bernoulli(P(y > y')) draw.
  kBernoulli,
};

enum class EvaluationMode { kExact, kMonteCarlo };

enum class TrainingMethod { kSppo, kDpo, kIpo };

const char* TrainingMethodName(TrainingMethod method);
TrainingMethod ParseTrainingMethod(const std::string& name);

struct RunConfig {
  std::size_t samples_per_prompt = 5;
  SelectionStrategy selection = SelectionStrategy::kBestAndWorst;
  // Responses used to estimate each win rate; 0 means all K.
  std::size_t estimation_batch = 0;
  GenerationMode generation = GenerationMode::kSampled;
  double eta = 1.0;
  int iterations = 3;
  OptimizerSettings optimizer;
  std::uint64_t seed = 0;
  SplitPlan split = SplitPlan::kRoundRobin;
  FeedbackMode feedback = FeedbackMode::kProbability;
  TrainingMethod method = TrainingMethod::kSppo;
  // Uniform pi_1 unless set, in which case pi_1 = RandomPolicy(seed).
  std::optional<std::uint64_t> initial_policy_seed;
  EvaluationMode evaluation = EvaluationMode::kExact;
  std::size_t eval_draws = 10000;
  // Pick, among optimiser checkpoints, the one with the best oracle win rate
  // against pi_t instead of the converged fit.
  bool holdout_selection = false;

  std::size_t EffectiveBatch() const {
    return estimation_batch == 0 ? samples_per_prompt : estimation_batch;
  }
  void Validate(const PreferenceOracle& oracle) const;
};

struct FitDiagnostics {
  int steps = 0;
  double final_grad_norm = 0.0;
  bool converged = false;
};

struct IterationReport {
  int t = 0;
  double win_rate_vs_previous = 0.5;
  double win_rate_vs_initial = 0.5;
  // Gap of pi_{t+1}.
  double duality_gap = 0.0;
  // Gap of the uniform mixture of pi_1..pi_{t+1}.
  double mixture_gap = 0.0;
  double kl_step = 0.0;
  std::size_t dataset_size = 0;
  FitDiagnostics fit;
  std::vector<double> loss_trace;
};

struct SelfPlayResult {
  std::vector<IterationReport> reports;
  // pi_1 .. pi_{T+1}.
  std::vector<TabularPolicy> policies;

  const TabularPolicy& final_policy() const { return policies.back(); }
};

// W[k][k'] = P(y_k > y_k' | x); identical ids tie at 1/2. In Bernoulli mode
// the upper triangle is drawn and mirrored, so W + W^T = 1 still holds.
SquareMatrix Annotate(const PreferenceOracle& oracle, PromptId x,
                      std::span<const ResponseId> samples,
                      FeedbackMode mode = FeedbackMode::kProbability,
                      const SampleKey& key = {});

// Scores used to pick winner and loser: PairRM scores for relative-reward
// oracles, row means of the win matrix otherwise.
std::vector<double> SelectionScores(const PreferenceOracle& oracle, PromptId x,
                                    std::span<const ResponseId> samples,
                                    const SquareMatrix& win);

// Builds the per-prompt dataset. The win rate of the sample at position i is
// averaged over an estimation batch of `estimation_batch` positions: i itself,
// then (for best_and_worst) the opposite member of the winner/loser pair, then
// the remaining positions in order. With the full batch this is the row mean
// of `win`. A winner/loser triplet is added whenever scores are supplied.
PreferenceDataset BuildDataset(PromptId x, std::span<const ResponseId> samples,
                               const SquareMatrix& win,
                               SelectionStrategy strategy,
                               std::optional<std::span<const double>> scores,
                               std::size_t estimation_batch = 0);

SelfPlayResult RunSelfPlay(const PreferenceOracle& oracle,
                           const RunConfig& config);

struct MethodTable {
  // "base", then "<method>/iter<t>".
  std::vector<std::string> labels;
  // entry(i, j) = P(policy_i > policy_j).
  SquareMatrix win_rates;
  std::vector<TabularPolicy> policies;
};

MethodTable CompareMethods(const PreferenceOracle& oracle,
                           const RunConfig& config,
                           std::span<const TrainingMethod> methods);

struct AblationResult {
  std::vector<std::size_t> k_values;
  std::vector<SelfPlayResult> runs;
};

// Re-runs the self-play loop with each estimation batch size; everything
// else, seeds included, is shared.
AblationResult KAblation(const PreferenceOracle& oracle,
                         const RunConfig& config,
                         std::span<const std::size_t> k_values);

}  // namespace sppo

#endif  // SPPO_SELFPLAY_H_
