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

#include "sppo/selfplay.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "sppo/errors.h"
#include "sppo/exact_solver.h"
#include "sppo/games.h"
#include "sppo/numeric.h"
#include "sppo/rng.h"

namespace sppo {

const char* SelectionStrategyName(SelectionStrategy strategy) {
  return strategy == SelectionStrategy::kAllK ? "all_k" : "best_and_worst";
}

PreferenceTriplet MakeTriplet(PromptId x, ResponseId winner, ResponseId loser,
                              double p_win) {
  if (!(p_win >= 0.0 && p_win <= 1.0)) {
    throw InputError("triplet preference must lie in [0, 1]");
  }
  return {x, winner, loser, p_win};
}

void PreferenceDataset::Append(const PreferenceDataset& other) {
  entries.insert(entries.end(), other.entries.begin(), other.entries.end());
  triplets.insert(triplets.end(), other.triplets.begin(), other.triplets.end());
  if (batches.size() < other.batches.size()) batches.resize(other.batches.size());
  for (std::size_t x = 0; x < other.batches.size(); ++x) {
    if (!other.batches[x].empty()) batches[x] = other.batches[x];
  }
  exact = exact || other.exact;
}

const char* TrainingMethodName(TrainingMethod method) {
  switch (method) {
    case TrainingMethod::kSppo:
      return "sppo";
    case TrainingMethod::kDpo:
      return "dpo";
    case TrainingMethod::kIpo:
      return "ipo";
  }
  return "unknown";
}

TrainingMethod ParseTrainingMethod(const std::string& name) {
  if (name == "sppo") return TrainingMethod::kSppo;
  if (name == "dpo" || name == "dpo_iter") return TrainingMethod::kDpo;
  if (name == "ipo" || name == "ipo_iter") return TrainingMethod::kIpo;
  throw InputError("unknown training method '" + name + "'");
}

void RunConfig::Validate(const PreferenceOracle& oracle) const {
  if (samples_per_prompt < 1) throw InputError("K must be >= 1");
  if (estimation_batch > samples_per_prompt) {
    throw InputError("estimation batch must not exceed K");
  }
  if (!std::isfinite(eta) || eta <= 0.0) {
    throw InputError("eta must be finite and positive");
  }
  if (iterations < 1) throw InputError("iterations must be >= 1");
  if (generation == GenerationMode::kSampled && samples_per_prompt < 2 &&
      (selection == SelectionStrategy::kBestAndWorst ||
       method != TrainingMethod::kSppo)) {
    throw InputError("winner/loser selection needs K >= 2");
  }
  if (evaluation == EvaluationMode::kMonteCarlo && eval_draws < 1) {
    throw InputError("Monte Carlo evaluation needs >= 1 draw");
  }
  if (oracle.num_prompts() == 0) throw InputError("oracle has no prompts");
}

SquareMatrix Annotate(const PreferenceOracle& oracle, PromptId x,
                      std::span<const ResponseId> samples, FeedbackMode mode,
                      const SampleKey& key) {
  const std::size_t k = samples.size();
  if (k < 1) throw InputError("annotation needs >= 1 sample");
  const CounterRng rng(key.seed);
  SquareMatrix win(k, 0.5);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      double p = oracle.Prob(x, samples[i], samples[j]);
      if (mode == FeedbackMode::kBernoulli && samples[i] != samples[j]) {
        p = rng.Uniform(key.iteration, x.index, i * k + j, 17) < p ? 1.0 : 0.0;
      }
      win(i, j) = p;
      win(j, i) = 1.0 - p;
    }
  }
  return win;
}

std::vector<double> SelectionScores(const PreferenceOracle& oracle, PromptId x,
                                    std::span<const ResponseId> samples,
                                    const SquareMatrix& win) {
  if (win.size() != samples.size()) {
    throw InputError("win matrix does not match the sample batch");
  }
  std::vector<double> scores(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    scores[i] = oracle.kind() == OracleKind::kRelativeReward
                    ? PairRmScore(oracle, x, samples[i], samples)
                    : Sum(win.row(i)) / static_cast<double>(samples.size());
  }
  return scores;
}

PreferenceDataset BuildDataset(PromptId x, std::span<const ResponseId> samples,
                               const SquareMatrix& win,
                               SelectionStrategy strategy,
                               std::optional<std::span<const double>> scores,
                               std::size_t estimation_batch) {
  const std::size_t k_all = samples.size();
  if (k_all < 1) throw InputError("dataset needs >= 1 sample");
  if (win.size() != k_all) {
    throw InputError("win matrix does not match the sample batch");
  }
  const std::size_t batch = estimation_batch == 0 ? k_all : estimation_batch;
  if (batch > k_all) throw InputError("estimation batch must not exceed K");
  if (strategy == SelectionStrategy::kBestAndWorst && !scores) {
    throw InputError("best_and_worst selection requires scores");
  }
  if (scores && scores->size() != k_all) {
    throw InputError("one score per sample is required");
  }

  std::optional<WinnerLoser> pair;
  if (scores && k_all >= 2) pair = SelectWinnerLoser(*scores);
  if (strategy == SelectionStrategy::kBestAndWorst && !pair) {
    throw InputError("best_and_worst selection needs K >= 2");
  }

  PreferenceDataset dataset;
  dataset.strategy = strategy;
  dataset.batches.resize(x.index + 1);
  dataset.batches[x.index].assign(samples.begin(), samples.end());

  const auto estimate = [&](std::size_t i) {
    std::vector<std::size_t> positions{i};
    if (strategy == SelectionStrategy::kBestAndWorst) {
      if (i == pair->winner) positions.push_back(pair->loser);
      if (i == pair->loser) positions.push_back(pair->winner);
    }
    for (std::size_t j = 0; j < k_all && positions.size() < batch; ++j) {
      if (std::find(positions.begin(), positions.end(), j) == positions.end()) {
        positions.push_back(j);
      }
    }
    positions.resize(batch);
    WinRateEstimate est;
    est.k = batch;
    CompensatedSum sum;
    for (std::size_t j : positions) {
      sum.Add(win(i, j));
      est.sample_ids.push_back(samples[j]);
    }
    est.value = sum.value() / static_cast<double>(batch);
    DatasetEntry entry;
    entry.prompt = x;
    entry.response = samples[i];
    entry.estimate = std::move(est);
    return entry;
  };

  if (strategy == SelectionStrategy::kAllK) {
    for (std::size_t i = 0; i < k_all; ++i) dataset.entries.push_back(estimate(i));
  } else {
    dataset.entries.push_back(estimate(pair->winner));
    dataset.entries.push_back(estimate(pair->loser));
  }
  if (pair) {
    dataset.triplets.push_back(MakeTriplet(x, samples[pair->winner],
                                           samples[pair->loser],
                                           win(pair->winner, pair->loser)));
  }
  return dataset;
}

namespace {

std::vector<std::size_t> PortionPrompts(std::size_t prompts, int iterations,
                                        int t, SplitPlan split) {
  std::vector<std::size_t> out;
  for (std::size_t x = 0; x < prompts; ++x) {
    if (split == SplitPlan::kNone ||
        x % static_cast<std::size_t>(iterations) ==
            static_cast<std::size_t>(t - 1)) {
      out.push_back(x);
    }
  }
  return out;
}

std::size_t InverseCdf(std::span<const double> probs, double u) {
  double cumulative = 0.0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last = i;
    cumulative += probs[i];
    if (u < cumulative) return i;
  }
  return last;
}

double MonteCarloWinRate(const PreferenceOracle& oracle,
                         const TabularPolicy& pi, const TabularPolicy& pi2,
                         std::size_t draws, const CounterRng& rng,
                         std::uint64_t stream) {
  const auto& weights = oracle.prompt_weights();
  CompensatedSum sum;
  for (std::size_t i = 0; i < draws; ++i) {
    const PromptId x(InverseCdf(weights, rng.Uniform(stream, i, 0, 41)));
    const ResponseId y = InverseCdf(pi.Row(x), rng.Uniform(stream, i, 1, 41));
    const ResponseId y2 = InverseCdf(pi2.Row(x), rng.Uniform(stream, i, 2, 41));
    sum.Add(oracle.Prob(x, y, y2));
  }
  return sum.value() / static_cast<double>(draws);
}

double WeightedKl(const TabularPolicy& p, const TabularPolicy& q,
                  const std::vector<double>& weights) {
  CompensatedSum sum;
  for (std::size_t x = 0; x < p.num_prompts(); ++x) {
    const PromptId px(x);
    sum.Add(weights[x] * KlDivergenceLog(p.LogRow(px), q.LogRow(px)));
  }
  return sum.value();
}

PreferenceDataset ExactPortionDataset(const TabularPolicy& pi_t,
                                      const PreferenceOracle& oracle,
                                      const std::vector<std::size_t>& portion) {
  PreferenceDataset full = ExactDataset(pi_t, oracle);
  PreferenceDataset out;
  out.exact = true;
  out.batches.resize(oracle.num_prompts());
  for (const DatasetEntry& e : full.entries) {
    if (std::binary_search(portion.begin(), portion.end(), e.prompt.index)) {
      out.entries.push_back(e);
    }
  }
  for (std::size_t x : portion) {
    const PromptId px(x);
    const std::vector<double> wins =
        WinRatesAgainst(oracle, px, pi_t.Row(px));
    if (wins.size() < 2) continue;
    const WinnerLoser wl = SelectWinnerLoser(wins);
    out.triplets.push_back(
        MakeTriplet(px, wl.winner, wl.loser, oracle.Prob(px, wl.winner, wl.loser)));
  }
  return out;
}

PairwiseMethod ToPairwise(TrainingMethod method) {
  return method == TrainingMethod::kDpo ? PairwiseMethod::kDpo
                                        : PairwiseMethod::kIpo;
}

}  // namespace

SelfPlayResult RunSelfPlay(const PreferenceOracle& oracle,
                           const RunConfig& config) {
  config.Validate(oracle);
  const ResponseUniverse& universe = oracle.universe();
  const std::vector<double>& weights = oracle.prompt_weights();
  const CounterRng eval_rng(config.seed ^ 0x5eedf00dULL);

  SelfPlayResult result;
  result.policies.push_back(
      config.initial_policy_seed
          ? RandomPolicy(universe, *config.initial_policy_seed)
          : TabularPolicy::Uniform(universe));
  if (!result.policies.front().FullySupported()) {
    throw InputError("initial policy must be fully supported");
  }

  for (int t = 1; t <= config.iterations; ++t) {
    const TabularPolicy& pi_t = result.policies.back();
    const std::vector<std::size_t> portion =
        PortionPrompts(oracle.num_prompts(), config.iterations, t, config.split);
    const SampleKey key{config.seed, static_cast<std::uint64_t>(t)};

    PreferenceDataset dataset;
    if (config.generation == GenerationMode::kExact) {
      dataset = ExactPortionDataset(pi_t, oracle, portion);
    } else {
      const bool want_scores =
          config.selection == SelectionStrategy::kBestAndWorst ||
          config.method != TrainingMethod::kSppo;
      for (std::size_t xi : portion) {
        const PromptId x(xi);
        const std::vector<ResponseId> samples =
            SampleResponses(pi_t, x, config.samples_per_prompt, key);
        const SquareMatrix win =
            Annotate(oracle, x, samples, config.feedback, key);
        std::optional<std::vector<double>> scores;
        if (want_scores) scores = SelectionScores(oracle, x, samples, win);
        std::optional<std::span<const double>> score_view;
        if (scores) score_view = std::span<const double>(*scores);
        dataset.Append(BuildDataset(x, samples, win, config.selection,
                                    score_view, config.estimation_batch));
      }
      dataset.strategy = config.selection;
    }
    dataset.iteration = t;

    FitResult fit;
    if (config.method == TrainingMethod::kSppo) {
      const RegressionTarget target =
          config.optimizer.mode == BaselineMode::kExactLogZ
              ? RegressionTarget::ExactLogZ(
                    config.eta, EmpiricalLogPartition(pi_t, oracle, config.eta,
                                                      dataset))
              : RegressionTarget::ConstantBaseline(
                    config.eta, config.optimizer.baseline_override);
      fit = FitIteration(pi_t, dataset, target, config.optimizer);
    } else {
      fit = FitPairwise(pi_t, dataset.triplets, ToPairwise(config.method),
                        config.eta, config.optimizer);
    }

    TabularPolicy next = fit.policy.Realize();
    if (config.holdout_selection && !fit.checkpoints.empty()) {
      double best = PolicyVsPolicy(oracle, next, pi_t);
      for (const SoftmaxPolicy& candidate : fit.checkpoints) {
        TabularPolicy realized = candidate.Realize();
        const double score = PolicyVsPolicy(oracle, realized, pi_t);
        if (score > best) {
          best = score;
          next = std::move(realized);
        }
      }
    }

    IterationReport report;
    report.t = t;
    if (config.evaluation == EvaluationMode::kExact) {
      report.win_rate_vs_previous = PolicyVsPolicy(oracle, next, pi_t);
      report.win_rate_vs_initial =
          PolicyVsPolicy(oracle, next, result.policies.front());
    } else {
      report.win_rate_vs_previous = MonteCarloWinRate(
          oracle, next, pi_t, config.eval_draws, eval_rng, 2 * t);
      report.win_rate_vs_initial =
          MonteCarloWinRate(oracle, next, result.policies.front(),
                            config.eval_draws, eval_rng, 2 * t + 1);
    }
    report.duality_gap = DualityGap(next, oracle);
    report.kl_step = WeightedKl(next, pi_t, weights);
    report.dataset_size = config.method == TrainingMethod::kSppo
                              ? dataset.entries.size()
                              : dataset.triplets.size();
    report.fit = {fit.steps, fit.final_grad_norm, fit.converged};
    report.loss_trace = std::move(fit.loss_trace);

    result.policies.push_back(std::move(next));
    report.mixture_gap =
        DualityGap(MixturePolicy(result.policies).Materialize(), oracle);
    result.reports.push_back(std::move(report));
  }
  return result;
}

MethodTable CompareMethods(const PreferenceOracle& oracle,
                           const RunConfig& config,
                           std::span<const TrainingMethod> methods) {
  MethodTable table;
  table.labels.push_back("base");
  bool have_base = false;
  for (TrainingMethod method : methods) {
    RunConfig run = config;
    run.method = method;
    SelfPlayResult result = RunSelfPlay(oracle, run);
    if (!have_base) {
      table.policies.push_back(result.policies.front());
      have_base = true;
    }
    for (std::size_t t = 1; t < result.policies.size(); ++t) {
      table.labels.push_back(std::string(TrainingMethodName(method)) + "/iter" +
                             std::to_string(t));
      table.policies.push_back(std::move(result.policies[t]));
    }
  }
  if (!have_base) {
    table.policies.push_back(config.initial_policy_seed
                                 ? RandomPolicy(oracle.universe(),
                                                *config.initial_policy_seed)
                                 : TabularPolicy::Uniform(oracle.universe()));
  }
  const std::size_t n = table.policies.size();
  table.win_rates = SquareMatrix(n, 0.5);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double p = PolicyVsPolicy(oracle, table.policies[i], table.policies[j]);
      table.win_rates(i, j) = p;
      table.win_rates(j, i) = 1.0 - p;
    }
  }
  return table;
}

AblationResult KAblation(const PreferenceOracle& oracle,
                         const RunConfig& config,
                         std::span<const std::size_t> k_values) {
  AblationResult result;
  for (std::size_t k : k_values) {
    if (k < 1 || k > config.samples_per_prompt) {
      throw InputError("ablation batch size " + std::to_string(k) +
                       " must lie in [1, K]");
    }
    RunConfig run = config;
    run.estimation_batch = k;
    result.k_values.push_back(k);
    result.runs.push_back(RunSelfPlay(oracle, run));
  }
  return result;
}

}  // namespace sppo
