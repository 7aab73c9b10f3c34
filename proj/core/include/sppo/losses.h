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

// Loss family for preference fine-tuning on tabular policies: the SPPO
// square-loss regression, its pairwise form, DPO, IPO and KTO, with analytic
// gradients, a plain gradient-descent fitter, a finite-difference gradient
// checker, and the policy-gradient equivalence of the square loss.
//
// Pairwise losses take log-ratios pre-scaled by beta = 1/eta:
//   a = beta log(pi_theta(y_w|x) / pi_ref(y_w|x))
//   b = beta log(pi_theta(y_l|x) / pi_ref(y_l|x))
//   c = beta KL(pi_theta || pi_ref)

#ifndef SPPO_LOSSES_H_
#define SPPO_LOSSES_H_

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "sppo/dataset.h"
#include "sppo/policy.h"
#include "sppo/preference.h"

namespace sppo {

enum class BaselineMode {
  // Subtract log Z of the empirical opponent, computed exactly.
  kExactLogZ,
  // Subtract a constant (eta/2 by default).
  kConstantBaseline,
};

// Regression target eta * P_hat(y > pi_t | x) - baseline(x).
class RegressionTarget {
 public:
  static RegressionTarget ConstantBaseline(
      double eta, std::optional<double> baseline = std::nullopt);
  static RegressionTarget ExactLogZ(double eta, std::vector<double> log_z);

  BaselineMode mode() const { return mode_; }
  double eta() const { return eta_; }
  double Baseline(PromptId x) const;
  double Value(const DatasetEntry& entry) const;

 private:
  RegressionTarget() = default;

  BaselineMode mode_ = BaselineMode::kConstantBaseline;
  double eta_ = 1.0;
  double constant_ = 0.5;
  std::vector<double> log_z_;
};

// log Z_{pi_hat_t^K}(x) = log E_{y~pi_t} exp(eta P(y > pi_hat^K | x)) for every
// prompt with a sampled batch; NaN for prompts without one. For an exact
// dataset this is the exact log partition function.
std::vector<double> EmpiricalLogPartition(const TabularPolicy& pi_t,
                                          const PreferenceOracle& oracle,
                                          double eta,
                                          const PreferenceDataset& dataset);

// Every response of every prompt, P_hat = P(y > pi_t | x) exactly, weights
// pi_t(y|x) * w(x). The K -> infinity limit of sampled data.
PreferenceDataset ExactDataset(const TabularPolicy& pi_t,
                               const PreferenceOracle& oracle);

struct LossReport {
  double loss = 0.0;
  std::vector<double> gradient;
  std::vector<double> residuals;
};

// Weighted mean over entries of
//   (log(pi_theta(y|x) / pi_t(y|x)) - target(y, x))^2
// with the gradient taken through the softmax.
LossReport SppoObjective(const SoftmaxPolicy& theta, const TabularPolicy& pi_t,
                         const PreferenceDataset& dataset,
                         const RegressionTarget& target);

// Value and partial derivatives of a scalar pairwise loss.
struct PairLoss {
  double value = 0.0;
  double grad_a = 0.0;
  double grad_b = 0.0;
  double grad_c = 0.0;
};

// Pairwise symmetric SPPO loss evaluated at raw log-ratios eta*a and eta*b:
//   (eta a - eta (p - 1/2))^2 + (eta b - eta ((1 - p) - 1/2))^2.
// For eta = 1 and p = 1 this is (a - 1/2)^2 + (b + 1/2)^2.
PairLoss SppoPairwiseLoss(double a, double b, double p_win, double eta = 1.0);
// -log sigmoid(a - b).
PairLoss DpoLoss(double a, double b);
// ((a - b) - 1)^2.
PairLoss IpoLoss(double a, double b);
// sigmoid(c - a) + sigmoid(b - c).
PairLoss KtoLoss(double a, double b, double c);

// Per-(prompt, response) unnormalised log-ratio a(y; x).
class UnconstrainedLogRatio {
 public:
  explicit UnconstrainedLogRatio(std::vector<std::vector<double>> values);

  double at(PromptId x, ResponseId y) const { return values_[x.index][y]; }
  const std::vector<std::vector<double>>& values() const { return values_; }

 private:
  std::vector<std::vector<double>> values_;
};

// Optimiser settings of the run config.
struct OptimizerSettings {
  double step_size = 1.0;
  int max_steps = 20000;
  double grad_tol = 1e-10;
  // Armijo backtracking on top of the fixed step.
  bool line_search = true;
  BaselineMode mode = BaselineMode::kConstantBaseline;
  std::optional<double> baseline_override;
  // Keep a parameter snapshot every N steps (0 disables).
  int checkpoint_every = 0;
};

// f(params, grad_out) -> value.
using ObjectiveFn =
    std::function<double(std::span<const double>, std::span<double>)>;

struct DescentResult {
  std::vector<double> params;
  int steps = 0;
  double final_grad_norm = 0.0;
  bool converged = false;
  std::vector<double> loss_trace;
  std::vector<std::vector<double>> checkpoints;
};

// Plain gradient descent, optional backtracking, no momentum.
DescentResult GradientDescent(const ObjectiveFn& objective,
                              std::vector<double> init,
                              const OptimizerSettings& settings);

struct FitResult {
  SoftmaxPolicy policy;
  int steps = 0;
  double final_grad_norm = 0.0;
  bool converged = false;
  std::vector<double> loss_trace;
  std::vector<SoftmaxPolicy> checkpoints;
};

// Minimises SppoObjective starting from logits = log pi_t. Non-convergence is
// reported through `converged` and `final_grad_norm`.
FitResult FitIteration(const TabularPolicy& pi_t,
                       const PreferenceDataset& dataset,
                       const RegressionTarget& target,
                       const OptimizerSettings& settings);

enum class PairwiseMethod { kSppo, kDpo, kIpo };

const char* PairwiseMethodName(PairwiseMethod method);

// Mean pairwise loss over triplets with pi_ref = pi_t; gradient w.r.t. logits.
LossReport PairwiseObjective(const SoftmaxPolicy& theta,
                             const TabularPolicy& pi_ref,
                             std::span<const PreferenceTriplet> triplets,
                             PairwiseMethod method, double eta);

FitResult FitPairwise(const TabularPolicy& pi_t,
                      std::span<const PreferenceTriplet> triplets,
                      PairwiseMethod method, double eta,
                      const OptimizerSettings& settings);

// Largest relative error between the analytic gradient and central finite
// differences, |g - g_fd| / max(|g|, |g_fd|, 1e-8). Steps are scaled by
// max(1, |param|).
double GradientCheck(const ObjectiveFn& objective,
                     std::span<const double> params, double epsilon = 1e-6);

struct GradientComparison {
  std::vector<double> lhs;
  std::vector<double> rhs;
  double max_deviation = 0.0;
};

// Policy-gradient form versus square-loss form of the KL-regularised
// objective J(theta) = E_{y~pi_theta}[r - eta^-1 log(pi_theta / pi_ref)]:
//
//   lhs = E_{y~pi_theta}[(r - eta^-1 log(pi_theta/pi_ref) - b) grad log pi_theta]
//   rhs = (eta / 2) E_{y~sg(pi_theta)}[-grad (r - eta^-1 log(pi_theta/pi_ref) - b)^2]
//
// Both are exact expectations by enumeration, weighted over prompts. The
// factor 1/2 in rhs comes from grad X^2 = 2 X grad X.
GradientComparison PolicyGradientEquivalence(
    const SoftmaxPolicy& theta, const TabularPolicy& pi_ref,
    const std::vector<std::vector<double>>& reward,
    const std::vector<double>& baseline, double eta,
    const std::vector<double>& prompt_weights);

}  // namespace sppo

#endif  // SPPO_LOSSES_H_
