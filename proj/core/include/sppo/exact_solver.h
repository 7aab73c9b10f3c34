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

// Exact multiplicative-weights (Hedge) solver for the constant-sum preference
// game, with duality gaps and a numerical check of the Freund-Schapire regret
// bound that underlies the mixture-policy convergence guarantee.

#ifndef SPPO_EXACT_SOLVER_H_
#define SPPO_EXACT_SOLVER_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "sppo/policy.h"
#include "sppo/preference.h"

namespace sppo {

enum class EtaSchedule {
  kFixed,
  // eta = c / sqrt(T).
  kInverseSqrtT,
};

struct SolverConfig {
  double eta = 1.0;
  int t_max = 100;
  EtaSchedule eta_schedule = EtaSchedule::kFixed;
  double eta_constant = 1.0;

  void Validate() const;
  double EffectiveEta() const;
};

// log Z(x) = log sum_y pi_t(y|x) exp(eta P(y > pi_t | x)).
double LogPartition(const TabularPolicy& pi_t, const PreferenceOracle& oracle,
                    double eta, PromptId x);

// log pi_{t+1}(.|x) with pi_{t+1} proportional to pi_t exp(eta P(y > pi_t|x)).
std::vector<double> ExponentialUpdateRow(const TabularPolicy& pi_t,
                                         const PreferenceOracle& oracle,
                                         double eta, PromptId x);
TabularPolicy ExponentialUpdate(const TabularPolicy& pi_t,
                                const PreferenceOracle& oracle, double eta);

// max_y P(y > pi | x) - min_y P(y < pi | x). Pure best responses suffice
// because the inner objective is linear on the simplex.
double DualityGap(const TabularPolicy& pi, const PreferenceOracle& oracle,
                  PromptId x);
// Weighted average of the per-prompt gaps.
double DualityGap(const TabularPolicy& pi, const PreferenceOracle& oracle);
// Gap of the materialised mixture, not the mean of member gaps.
double DualityGap(const MixturePolicy& pi, const PreferenceOracle& oracle);

// min_pi P(pi < opponent), minimised per prompt over pure responses.
double MinLossAgainst(const TabularPolicy& opponent,
                      const PreferenceOracle& oracle);

struct GapRecord {
  int t = 0;
  // Gap of the mixture of pi_1..pi_t.
  double gap = 0.0;
  // KL(pi_{t+1} || pi_t), prompt-weighted.
  double kl_step = 0.0;
  // RHS - LHS of the Freund-Schapire inequality for the prefix 1..t.
  double fs_residual = 0.0;
};

struct GapTrace {
  std::vector<GapRecord> records;
};

struct MwuResult {
  // pi_1 .. pi_T.
  std::vector<TabularPolicy> policies;
  MixturePolicy mixture;
  GapTrace trace;
  double eta = 0.0;
};

// T rounds of the exponential update from a fully supported pi_1.
MwuResult RunMwu(const TabularPolicy& pi_1, const PreferenceOracle& oracle,
                 const SolverConfig& config);

// Freund-Schapire residual at every prefix length t for the self-play
// instantiation mu_t = pi_t:
//
//   sum_t P(pi_t < pi_t)
//     <= min_pi [ eta/(1-e^-eta) sum_t P(pi < pi_t) + KL(pi||pi_1)/(1-e^-eta) ]
//
// The minimum is taken over the whole simplex using the Gibbs variational
// identity min_pi <pi, L> + B KL(pi||pi_1) = -B log E_{pi_1} exp(-L/B), which
// is never larger than the minimum over pure responses.
std::vector<double> FreundSchapireCheck(const std::vector<TabularPolicy>& seq,
                                        const PreferenceOracle& oracle,
                                        double eta);

// Draws n responses from pi(.|x) and keeps the one with the highest
// PairRM-style score against the drawn batch (lowest index on ties).
ResponseId BestOfNRerank(const TabularPolicy& pi, const PreferenceOracle& oracle,
                         PromptId x, std::size_t n, const SampleKey& key);

std::string GapTraceCsv(const GapTrace& trace);

}  // namespace sppo

#endif  // SPPO_EXACT_SOLVER_H_
