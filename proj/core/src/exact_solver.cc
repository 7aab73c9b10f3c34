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

#include "sppo/exact_solver.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include "sppo/errors.h"
#include "sppo/numeric.h"

namespace sppo {
namespace {

void CheckShape(const TabularPolicy& pi, const PreferenceOracle& oracle) {
  if (pi.num_prompts() != oracle.num_prompts()) {
    throw InputError("policy and oracle disagree on the number of prompts");
  }
  for (std::size_t x = 0; x < pi.num_prompts(); ++x) {
    if (pi.num_responses(PromptId(x)) != oracle.num_responses(PromptId(x))) {
      throw InputError("policy and oracle disagree on response counts");
    }
  }
}

// P(y < opponent | x) = sum_y' opponent(y') P(y' > y | x) for every y.
std::vector<double> LossRatesAgainst(const PreferenceOracle& oracle, PromptId x,
                                     std::span<const double> opponent) {
  const SquareMatrix& m = oracle.Matrix(x);
  std::vector<double> rates(m.size());
  for (std::size_t y = 0; y < m.size(); ++y) {
    CompensatedSum sum;
    for (std::size_t y2 = 0; y2 < m.size(); ++y2) {
      if (opponent[y2] != 0.0) sum.Add(opponent[y2] * m(y2, y));
    }
    rates[y] = sum.value();
  }
  return rates;
}

double GapOfRow(const PreferenceOracle& oracle, PromptId x,
                std::span<const double> row) {
  const std::vector<double> wins = WinRatesAgainst(oracle, x, row);
  const std::vector<double> losses = LossRatesAgainst(oracle, x, row);
  const double best = *std::max_element(wins.begin(), wins.end());
  const double worst = *std::min_element(losses.begin(), losses.end());
  return std::max(0.0, best - worst);
}

}  // namespace

void SolverConfig::Validate() const {
  if (!(eta > 0.0) || !std::isfinite(eta)) {
    throw InputError("eta must be a positive finite number");
  }
  if (t_max < 1) throw InputError("t_max must be >= 1");
  if (eta_schedule == EtaSchedule::kInverseSqrtT &&
      (!(eta_constant > 0.0) || !std::isfinite(eta_constant))) {
    throw InputError("eta constant must be positive");
  }
}

double SolverConfig::EffectiveEta() const {
  if (eta_schedule == EtaSchedule::kInverseSqrtT) {
    return eta_constant / std::sqrt(static_cast<double>(t_max));
  }
  return eta;
}

double LogPartition(const TabularPolicy& pi_t, const PreferenceOracle& oracle,
                    double eta, PromptId x) {
  CheckShape(pi_t, oracle);
  const auto log_row = pi_t.LogRow(x);
  const std::vector<double> wins = WinRatesAgainst(oracle, x, pi_t.Row(x));
  std::vector<double> terms(log_row.size());
  for (std::size_t y = 0; y < terms.size(); ++y) {
    terms[y] = log_row[y] + eta * wins[y];
  }
  return LogSumExp(terms);
}

std::vector<double> ExponentialUpdateRow(const TabularPolicy& pi_t,
                                         const PreferenceOracle& oracle,
                                         double eta, PromptId x) {
  CheckShape(pi_t, oracle);
  const auto log_row = pi_t.LogRow(x);
  const std::vector<double> wins = WinRatesAgainst(oracle, x, pi_t.Row(x));
  std::vector<double> next(log_row.size());
  for (std::size_t y = 0; y < next.size(); ++y) {
    next[y] = log_row[y] + eta * wins[y];
  }
  const double log_z = LogSumExp(next);
  for (double& v : next) v -= log_z;
  return next;
}

TabularPolicy ExponentialUpdate(const TabularPolicy& pi_t,
                                const PreferenceOracle& oracle, double eta) {
  std::vector<std::vector<double>> rows;
  rows.reserve(pi_t.num_prompts());
  for (std::size_t x = 0; x < pi_t.num_prompts(); ++x) {
    rows.push_back(ExponentialUpdateRow(pi_t, oracle, eta, PromptId(x)));
  }
  return TabularPolicy::FromLogWeights(std::move(rows));
}

double DualityGap(const TabularPolicy& pi, const PreferenceOracle& oracle,
                  PromptId x) {
  CheckShape(pi, oracle);
  return GapOfRow(oracle, x, pi.Row(x));
}

double DualityGap(const TabularPolicy& pi, const PreferenceOracle& oracle) {
  CheckShape(pi, oracle);
  CompensatedSum gap;
  const auto& w = oracle.prompt_weights();
  for (std::size_t x = 0; x < pi.num_prompts(); ++x) {
    if (w[x] == 0.0) continue;
    gap.Add(w[x] * GapOfRow(oracle, PromptId(x), pi.Row(PromptId(x))));
  }
  return gap.value();
}

double DualityGap(const MixturePolicy& pi, const PreferenceOracle& oracle) {
  return DualityGap(pi.Materialize(), oracle);
}

double MinLossAgainst(const TabularPolicy& opponent,
                      const PreferenceOracle& oracle) {
  CheckShape(opponent, oracle);
  CompensatedSum total;
  const auto& w = oracle.prompt_weights();
  for (std::size_t x = 0; x < opponent.num_prompts(); ++x) {
    const auto losses =
        LossRatesAgainst(oracle, PromptId(x), opponent.Row(PromptId(x)));
    total.Add(w[x] * *std::min_element(losses.begin(), losses.end()));
  }
  return total.value();
}

std::vector<double> FreundSchapireCheck(const std::vector<TabularPolicy>& seq,
                                        const PreferenceOracle& oracle,
                                        double eta) {
  if (seq.empty()) throw InputError("Freund-Schapire check needs a sequence");
  if (!(eta > 0.0)) throw InputError("eta must be positive");
  for (const auto& pi : seq) CheckShape(pi, oracle);
  const TabularPolicy& initial = seq.front();

  const double denom = -std::expm1(-eta);
  const double scale_kl = 1.0 / denom;
  const auto& w = oracle.prompt_weights();
  const std::size_t prompts = oracle.num_prompts();

  // Cumulative sum_t P(y < pi_t | x) for every (x, y).
  std::vector<std::vector<CompensatedSum>> cumulative(prompts);
  for (std::size_t x = 0; x < prompts; ++x) {
    cumulative[x].resize(oracle.num_responses(PromptId(x)));
  }
  CompensatedSum lhs;
  std::vector<double> residuals;
  residuals.reserve(seq.size());
  std::vector<double> terms;

  for (const TabularPolicy& pi : seq) {
    CompensatedSum rhs;
    for (std::size_t x = 0; x < prompts; ++x) {
      const PromptId px(x);
      const std::vector<double> row = pi.Row(px);
      const std::vector<double> losses = LossRatesAgainst(oracle, px, row);
      CompensatedSum self_loss;
      for (std::size_t y = 0; y < row.size(); ++y) {
        self_loss.Add(row[y] * losses[y]);
        cumulative[x][y].Add(losses[y]);
      }
      lhs.Add(w[x] * self_loss.value());

      const auto log_init = initial.LogRow(px);
      terms.resize(row.size());
      for (std::size_t y = 0; y < row.size(); ++y) {
        terms[y] = log_init[y] - eta * cumulative[x][y].value();
      }
      rhs.Add(w[x] * (-scale_kl * LogSumExp(terms)));
    }
    residuals.push_back(rhs.value() - lhs.value());
  }
  return residuals;
}

MwuResult RunMwu(const TabularPolicy& pi_1, const PreferenceOracle& oracle,
                 const SolverConfig& config) {
  config.Validate();
  CheckShape(pi_1, oracle);
  if (!pi_1.FullySupported()) {
    throw InputError("the initial policy must be fully supported");
  }
  const double eta = config.EffectiveEta();
  const std::size_t prompts = oracle.num_prompts();
  const auto& w = oracle.prompt_weights();

  std::vector<TabularPolicy> policies;
  policies.reserve(config.t_max);
  policies.push_back(pi_1);

  std::vector<std::vector<CompensatedSum>> mixture_sum(prompts);
  for (std::size_t x = 0; x < prompts; ++x) {
    mixture_sum[x].resize(oracle.num_responses(PromptId(x)));
  }

  GapTrace trace;
  trace.records.reserve(config.t_max);
  for (int t = 1; t <= config.t_max; ++t) {
    const TabularPolicy& current = policies.back();
    TabularPolicy next = ExponentialUpdate(current, oracle, eta);

    GapRecord record;
    record.t = t;
    CompensatedSum gap;
    CompensatedSum kl;
    std::vector<double> mixture_row;
    for (std::size_t x = 0; x < prompts; ++x) {
      const PromptId px(x);
      const std::vector<double> row = current.Row(px);
      mixture_row.resize(row.size());
      for (std::size_t y = 0; y < row.size(); ++y) {
        mixture_sum[x][y].Add(row[y]);
        mixture_row[y] = mixture_sum[x][y].value() / t;
      }
      gap.Add(w[x] * GapOfRow(oracle, px, mixture_row));
      kl.Add(w[x] * KlDivergenceLog(next.LogRow(px), current.LogRow(px)));
    }
    record.gap = gap.value();
    record.kl_step = kl.value();
    trace.records.push_back(record);

    if (t < config.t_max) policies.push_back(std::move(next));
  }

  const std::vector<double> residuals =
      FreundSchapireCheck(policies, oracle, eta);
  for (std::size_t i = 0; i < residuals.size(); ++i) {
    trace.records[i].fs_residual = residuals[i];
  }

  MixturePolicy mixture(policies);
  return MwuResult{std::move(policies), std::move(mixture), std::move(trace),
                   eta};
}

ResponseId BestOfNRerank(const TabularPolicy& pi, const PreferenceOracle& oracle,
                         PromptId x, std::size_t n, const SampleKey& key) {
  if (n == 0) throw InputError("best-of-n needs n >= 1");
  if (oracle.kind() != OracleKind::kRelativeReward) {
    throw UnsupportedOperationError(
        "best-of-n reranking needs a relative_reward oracle");
  }
  const std::vector<ResponseId> samples = SampleResponses(pi, x, n, key);
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double score = PairRmScore(oracle, x, samples[i], samples);
    if (score > best_score) {
      best_score = score;
      best = i;
    }
  }
  return samples[best];
}

std::string GapTraceCsv(const GapTrace& trace) {
  std::string out = "t,gap,kl_step,fs_residual\n";
  char line[160];
  for (const GapRecord& r : trace.records) {
    std::snprintf(line, sizeof(line), "%d,%.17g,%.17g,%.17g\n", r.t, r.gap,
                  r.kl_step, r.fs_residual);
    out += line;
  }
  return out;
}

}  // namespace sppo
