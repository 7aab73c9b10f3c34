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

#include "sppo/losses.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sppo/errors.h"
#include "sppo/exact_solver.h"
#include "sppo/numeric.h"

namespace sppo {
namespace {

double Norm(std::span<const double> v) {
  double sum = 0.0;
  for (double x : v) sum += x * x;
  return std::sqrt(sum);
}

double SigmoidDerivative(double z) {
  const double s = Sigmoid(z);
  return s * (1.0 - s);
}

void CheckProbability(double p) {
  if (!(p >= 0.0 && p <= 1.0)) {
    throw InputError("preference probability must lie in [0, 1]");
  }
}

}  // namespace

RegressionTarget RegressionTarget::ConstantBaseline(
    double eta, std::optional<double> baseline) {
  if (!std::isfinite(eta) || eta < 0.0) {
    throw InputError("eta must be finite and >= 0");
  }
  RegressionTarget target;
  target.mode_ = BaselineMode::kConstantBaseline;
  target.eta_ = eta;
  target.constant_ = baseline.value_or(eta / 2.0);
  if (!std::isfinite(target.constant_)) {
    throw InputError("baseline must be finite");
  }
  return target;
}

RegressionTarget RegressionTarget::ExactLogZ(double eta,
                                             std::vector<double> log_z) {
  if (!std::isfinite(eta) || eta < 0.0) {
    throw InputError("eta must be finite and >= 0");
  }
  RegressionTarget target;
  target.mode_ = BaselineMode::kExactLogZ;
  target.eta_ = eta;
  target.log_z_ = std::move(log_z);
  return target;
}

double RegressionTarget::Baseline(PromptId x) const {
  if (mode_ == BaselineMode::kConstantBaseline) return constant_;
  if (x.index >= log_z_.size() || !std::isfinite(log_z_[x.index])) {
    throw InputError("no log partition value for prompt " +
                     std::to_string(x.index));
  }
  return log_z_[x.index];
}

double RegressionTarget::Value(const DatasetEntry& entry) const {
  return eta_ * entry.estimate.value - Baseline(entry.prompt);
}

std::vector<double> EmpiricalLogPartition(const TabularPolicy& pi_t,
                                          const PreferenceOracle& oracle,
                                          double eta,
                                          const PreferenceDataset& dataset) {
  const std::size_t prompts = oracle.num_prompts();
  std::vector<double> log_z(prompts, std::numeric_limits<double>::quiet_NaN());
  if (dataset.exact) {
    for (const DatasetEntry& e : dataset.entries) {
      if (std::isnan(log_z[e.prompt.index])) {
        log_z[e.prompt.index] = LogPartition(pi_t, oracle, eta, e.prompt);
      }
    }
    return log_z;
  }
  for (std::size_t x = 0; x < std::min(prompts, dataset.batches.size()); ++x) {
    const auto& batch = dataset.batches[x];
    if (batch.empty()) continue;
    const PromptId px(x);
    const auto log_row = pi_t.LogRow(px);
    std::vector<double> terms(log_row.size());
    for (std::size_t y = 0; y < log_row.size(); ++y) {
      terms[y] = log_row[y] + eta * EmpiricalWinRate(oracle, px, y, batch).value;
    }
    log_z[x] = LogSumExp(terms);
  }
  return log_z;
}

PreferenceDataset ExactDataset(const TabularPolicy& pi_t,
                               const PreferenceOracle& oracle) {
  PreferenceDataset dataset;
  dataset.exact = true;
  dataset.batches.resize(oracle.num_prompts());
  const auto& w = oracle.prompt_weights();
  for (std::size_t x = 0; x < oracle.num_prompts(); ++x) {
    const PromptId px(x);
    const std::vector<double> row = pi_t.Row(px);
    const std::vector<double> wins = WinRatesAgainst(oracle, px, row);
    for (std::size_t y = 0; y < row.size(); ++y) {
      if (row[y] == 0.0 || w[x] == 0.0) continue;
      DatasetEntry entry;
      entry.prompt = px;
      entry.response = y;
      entry.estimate.value = wins[y];
      entry.weight = w[x] * row[y];
      dataset.entries.push_back(std::move(entry));
    }
  }
  return dataset;
}

LossReport SppoObjective(const SoftmaxPolicy& theta, const TabularPolicy& pi_t,
                         const PreferenceDataset& dataset,
                         const RegressionTarget& target) {
  if (theta.num_prompts() != pi_t.num_prompts()) {
    throw InputError("policy parameters and pi_t disagree on prompts");
  }
  LossReport report;
  report.gradient.assign(theta.params().size(), 0.0);
  if (dataset.entries.empty()) return report;

  CompensatedSum total_weight;
  for (const DatasetEntry& e : dataset.entries) total_weight.Add(e.weight);
  const double weight_sum = total_weight.value();
  if (!(weight_sum > 0.0)) throw InputError("dataset has zero total weight");

  const std::size_t prompts = theta.num_prompts();
  std::vector<std::vector<double>> log_probs(prompts);
  // Per-prompt sum of residual coefficients.
  std::vector<double> coeff_sum(prompts, 0.0);
  CompensatedSum loss;
  report.residuals.reserve(dataset.entries.size());

  for (const DatasetEntry& e : dataset.entries) {
    const std::size_t x = e.prompt.index;
    if (x >= prompts || e.response >= theta.num_responses(e.prompt)) {
      throw InputError("dataset entry outside the response universe");
    }
    const double log_pt = pi_t.LogProb(e.prompt, e.response);
    if (!std::isfinite(log_pt)) {
      throw DomainError("dataset entry lies outside the support of pi_t");
    }
    if (log_probs[x].empty()) log_probs[x] = theta.LogProbs(e.prompt);
    const double residual =
        log_probs[x][e.response] - log_pt - target.Value(e);
    report.residuals.push_back(residual);
    loss.Add(e.weight * residual * residual);
    const double coeff = 2.0 * e.weight * residual / weight_sum;
    report.gradient[theta.offset(e.prompt) + e.response] += coeff;
    coeff_sum[x] += coeff;
  }
  for (std::size_t x = 0; x < prompts; ++x) {
    if (log_probs[x].empty()) continue;
    const std::size_t off = theta.offset(PromptId(x));
    for (std::size_t j = 0; j < log_probs[x].size(); ++j) {
      report.gradient[off + j] -= coeff_sum[x] * std::exp(log_probs[x][j]);
    }
  }
  report.loss = loss.value() / weight_sum;
  return report;
}

PairLoss SppoPairwiseLoss(double a, double b, double p_win, double eta) {
  CheckProbability(p_win);
  const double u = eta * a - eta * (p_win - 0.5);
  const double v = eta * b - eta * ((1.0 - p_win) - 0.5);
  return {u * u + v * v, 2.0 * u * eta, 2.0 * v * eta, 0.0};
}

PairLoss DpoLoss(double a, double b) {
  const double gap = a - b;
  const double slope = Sigmoid(-gap);
  return {Softplus(-gap), -slope, slope, 0.0};
}

PairLoss IpoLoss(double a, double b) {
  const double e = (a - b) - 1.0;
  return {e * e, 2.0 * e, -2.0 * e, 0.0};
}

PairLoss KtoLoss(double a, double b, double c) {
  const double da = SigmoidDerivative(c - a);
  const double db = SigmoidDerivative(b - c);
  return {Sigmoid(c - a) + Sigmoid(b - c), -da, db, da - db};
}

UnconstrainedLogRatio::UnconstrainedLogRatio(
    std::vector<std::vector<double>> values)
    : values_(std::move(values)) {
  for (const auto& row : values_) {
    for (double v : row) {
      if (!std::isfinite(v)) throw InputError("log-ratios must be finite");
    }
  }
}

DescentResult GradientDescent(const ObjectiveFn& objective,
                              std::vector<double> init,
                              const OptimizerSettings& settings) {
  if (settings.max_steps < 0) throw InputError("max_steps must be >= 0");
  if (!(settings.step_size >= 0.0)) throw InputError("step size must be >= 0");
  constexpr double kArmijo = 1e-4;
  constexpr double kMinStep = 1e-20;

  DescentResult result;
  result.params = std::move(init);
  std::vector<double> grad(result.params.size());
  double value = objective(result.params, grad);
  result.loss_trace.push_back(value);

  std::vector<double> trial(result.params.size());
  std::vector<double> trial_grad(result.params.size());
  double step = settings.step_size;
  double grad_norm = Norm(grad);

  while (result.steps < settings.max_steps && grad_norm >= settings.grad_tol &&
         settings.step_size > 0.0) {
    if (settings.line_search) step = std::min(settings.step_size, 2.0 * step);
    bool accepted = false;
    double trial_value = value;
    while (step >= kMinStep) {
      for (std::size_t i = 0; i < trial.size(); ++i) {
        trial[i] = result.params[i] - step * grad[i];
      }
      trial_value = objective(trial, trial_grad);
      if (!settings.line_search ||
          trial_value <= value - kArmijo * step * grad_norm * grad_norm) {
        accepted = true;
        break;
      }
      step *= 0.5;
    }
    if (!accepted) break;
    result.params.swap(trial);
    grad.swap(trial_grad);
    value = trial_value;
    grad_norm = Norm(grad);
    ++result.steps;
    result.loss_trace.push_back(value);
    if (settings.checkpoint_every > 0 &&
        result.steps % settings.checkpoint_every == 0) {
      result.checkpoints.push_back(result.params);
    }
  }
  result.final_grad_norm = grad_norm;
  result.converged = grad_norm < settings.grad_tol;
  return result;
}

namespace {

FitResult ToFitResult(const SoftmaxPolicy& like, DescentResult descent) {
  FitResult fit;
  fit.policy = SoftmaxPolicy::WithParams(like, std::move(descent.params));
  fit.steps = descent.steps;
  fit.final_grad_norm = descent.final_grad_norm;
  fit.converged = descent.converged;
  fit.loss_trace = std::move(descent.loss_trace);
  for (auto& params : descent.checkpoints) {
    fit.checkpoints.push_back(SoftmaxPolicy::WithParams(like, std::move(params)));
  }
  return fit;
}

}  // namespace

FitResult FitIteration(const TabularPolicy& pi_t,
                       const PreferenceDataset& dataset,
                       const RegressionTarget& target,
                       const OptimizerSettings& settings) {
  const SoftmaxPolicy init = SoftmaxPolicy::FromPolicy(pi_t);
  const ObjectiveFn objective = [&](std::span<const double> params,
                                    std::span<double> grad) {
    const SoftmaxPolicy theta = SoftmaxPolicy::WithParams(
        init, std::vector<double>(params.begin(), params.end()));
    LossReport report = SppoObjective(theta, pi_t, dataset, target);
    std::copy(report.gradient.begin(), report.gradient.end(), grad.begin());
    return report.loss;
  };
  return ToFitResult(init, GradientDescent(objective, init.params(), settings));
}

const char* PairwiseMethodName(PairwiseMethod method) {
  switch (method) {
    case PairwiseMethod::kSppo:
      return "sppo";
    case PairwiseMethod::kDpo:
      return "dpo";
    case PairwiseMethod::kIpo:
      return "ipo";
  }
  return "unknown";
}

LossReport PairwiseObjective(const SoftmaxPolicy& theta,
                             const TabularPolicy& pi_ref,
                             std::span<const PreferenceTriplet> triplets,
                             PairwiseMethod method, double eta) {
  if (!(eta > 0.0)) throw InputError("eta must be positive");
  LossReport report;
  report.gradient.assign(theta.params().size(), 0.0);
  if (triplets.empty()) return report;
  const double beta = 1.0 / eta;
  const double inv_n = 1.0 / static_cast<double>(triplets.size());
  CompensatedSum loss;
  for (const PreferenceTriplet& tr : triplets) {
    const std::vector<double> log_p = theta.LogProbs(tr.prompt);
    const double ref_w = pi_ref.LogProb(tr.prompt, tr.winner);
    const double ref_l = pi_ref.LogProb(tr.prompt, tr.loser);
    if (!std::isfinite(ref_w) || !std::isfinite(ref_l)) {
      throw DomainError("triplet lies outside the support of pi_ref");
    }
    const double a = beta * (log_p[tr.winner] - ref_w);
    const double b = beta * (log_p[tr.loser] - ref_l);
    PairLoss pl;
    switch (method) {
      case PairwiseMethod::kSppo:
        pl = SppoPairwiseLoss(a, b, tr.p_win, eta);
        break;
      case PairwiseMethod::kDpo:
        pl = DpoLoss(a, b);
        break;
      case PairwiseMethod::kIpo:
        pl = IpoLoss(a, b);
        break;
    }
    loss.Add(pl.value);
    report.residuals.push_back(a - b);
    const std::size_t off = theta.offset(tr.prompt);
    const double ga = pl.grad_a * beta * inv_n;
    const double gb = pl.grad_b * beta * inv_n;
    report.gradient[off + tr.winner] += ga;
    report.gradient[off + tr.loser] += gb;
    for (std::size_t j = 0; j < log_p.size(); ++j) {
      report.gradient[off + j] -= (ga + gb) * std::exp(log_p[j]);
    }
  }
  report.loss = loss.value() * inv_n;
  return report;
}

FitResult FitPairwise(const TabularPolicy& pi_t,
                      std::span<const PreferenceTriplet> triplets,
                      PairwiseMethod method, double eta,
                      const OptimizerSettings& settings) {
  const SoftmaxPolicy init = SoftmaxPolicy::FromPolicy(pi_t);
  const ObjectiveFn objective = [&](std::span<const double> params,
                                    std::span<double> grad) {
    const SoftmaxPolicy theta = SoftmaxPolicy::WithParams(
        init, std::vector<double>(params.begin(), params.end()));
    LossReport report = PairwiseObjective(theta, pi_t, triplets, method, eta);
    std::copy(report.gradient.begin(), report.gradient.end(), grad.begin());
    return report.loss;
  };
  return ToFitResult(init, GradientDescent(objective, init.params(), settings));
}

double GradientCheck(const ObjectiveFn& objective,
                     std::span<const double> params, double epsilon) {
  if (!(epsilon > 0.0 && epsilon <= 1e-3)) {
    throw InputError("finite-difference epsilon must lie in (0, 1e-3]");
  }
  constexpr double kFloor = 1e-8;
  std::vector<double> point(params.begin(), params.end());
  std::vector<double> analytic(point.size());
  std::vector<double> scratch(point.size());
  objective(point, analytic);
  double worst = 0.0;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double original = point[i];
    const double h = epsilon * std::max(1.0, std::abs(original));
    point[i] = original + h;
    const double f_plus = objective(point, scratch);
    point[i] = original - h;
    const double f_minus = objective(point, scratch);
    point[i] = original;
    const double numeric = (f_plus - f_minus) / (2.0 * h);
    const double scale =
        std::max({std::abs(analytic[i]), std::abs(numeric), kFloor});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / scale);
  }
  return worst;
}

GradientComparison PolicyGradientEquivalence(
    const SoftmaxPolicy& theta, const TabularPolicy& pi_ref,
    const std::vector<std::vector<double>>& reward,
    const std::vector<double>& baseline, double eta,
    const std::vector<double>& prompt_weights) {
  const std::size_t prompts = theta.num_prompts();
  if (!(eta > 0.0)) throw InputError("eta must be positive");
  if (pi_ref.num_prompts() != prompts || reward.size() != prompts ||
      baseline.size() != prompts || prompt_weights.size() != prompts) {
    throw InputError("policy-gradient inputs disagree on the number of prompts");
  }
  if (!pi_ref.FullySupported()) {
    throw InputError("reference policy must be fully supported");
  }
  GradientComparison out;
  out.lhs.assign(theta.params().size(), 0.0);
  out.rhs.assign(theta.params().size(), 0.0);
  const double inv_eta = 1.0 / eta;

  for (std::size_t x = 0; x < prompts; ++x) {
    const PromptId px(x);
    const std::vector<double> log_p = theta.LogProbs(px);
    const auto log_ref = pi_ref.LogRow(px);
    const std::size_t n = log_p.size();
    if (log_ref.size() != n || reward[x].size() != n) {
      throw InputError("policy-gradient inputs disagree on response counts");
    }
    std::vector<double> p(n);
    for (std::size_t y = 0; y < n; ++y) p[y] = std::exp(log_p[y]);
    const std::size_t off = theta.offset(px);
    const double wx = prompt_weights[x];

    for (std::size_t y = 0; y < n; ++y) {
      // X = r - eta^-1 log(pi_theta / pi_ref) - b.
      const double advantage =
          reward[x][y] - inv_eta * (log_p[y] - log_ref[y]) - baseline[x];
      for (std::size_t j = 0; j < n; ++j) {
        const double score = (j == y ? 1.0 : 0.0) - p[j];  // d log pi(y) / d theta_j
        // Score-function form.
        out.lhs[off + j] += wx * p[y] * advantage * score;
        // Square form: d X^2 / d theta_j = 2 X dX/dtheta_j with the sampling
        // weight p[y] held fixed.
        const double d_advantage = -inv_eta * score;
        const double d_square = 2.0 * advantage * d_advantage;
        out.rhs[off + j] += wx * p[y] * (eta / 2.0) * (-d_square);
      }
    }
  }
  out.max_deviation = MaxAbsDifference(out.lhs, out.rhs);
  return out;
}

}  // namespace sppo
