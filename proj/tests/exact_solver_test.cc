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

#include <algorithm>
#include <cmath>
#include <vector>

#include "gtest/gtest.h"
#include "sppo/errors.h"
#include "sppo/exact_solver.h"
#include "sppo/games.h"
#include "sppo/numeric.h"
#include "sppo/preference.h"

namespace sppo {
namespace {

PreferenceOracle TwoByTwo(double m01) {
  SquareMatrix m(2, 0.5);
  m(0, 1) = m01;
  m(1, 0) = 1.0 - m01;
  return PreferenceOracle::FromMatrices({m});
}

// Independent duality gap: enumerate pure responses against pi, per prompt,
// weighted by the prompt distribution.
double BruteForceGap(const TabularPolicy& pi, const PreferenceOracle& o) {
  double total = 0.0;
  for (std::size_t x = 0; x < o.num_prompts(); ++x) {
    const PromptId px(x);
    const std::size_t n = o.num_responses(px);
    double best_win = -1.0;
    double worst_loss = 2.0;
    for (std::size_t y = 0; y < n; ++y) {
      double win = 0.0;
      double loss = 0.0;
      for (std::size_t z = 0; z < n; ++z) {
        win += pi.Prob(px, z) * o.Prob(px, y, z);
        loss += pi.Prob(px, z) * o.Prob(px, z, y);
      }
      best_win = std::max(best_win, win);
      worst_loss = std::min(worst_loss, loss);
    }
    total += o.prompt_weights()[x] * (best_win - worst_loss);
  }
  return total;
}

TEST(LogPartitionTest, SingleResponseIsHalfEta) {
  const auto o = PreferenceOracle::FromRewards({{0.3}});
  const auto pi = TabularPolicy::Uniform(o.universe());
  for (double eta : {0.0, 0.5, 3.0, 1000.0}) {
    EXPECT_NEAR(LogPartition(pi, o, eta, PromptId(0)), eta / 2.0, 1e-12);
  }
}

TEST(LogPartitionTest, HandComputedTwoByTwo) {
  const auto o = TwoByTwo(0.7);
  const auto pi = TabularPolicy::Uniform(o.universe());
  const double z = 0.5 * std::exp(0.6) + 0.5 * std::exp(0.4);
  EXPECT_NEAR(z, 1.656972, 1e-6);
  EXPECT_NEAR(LogPartition(pi, o, 1.0, PromptId(0)), std::log(z), 1e-15);
}

TEST(LogPartitionTest, JensenBounds) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto o = RandomMatrixOracle(2, 6, seed);
    const auto pi = RandomPolicy(o.universe(), seed + 7, 2.0);
    for (double eta : {0.1, 1.0, 10.0}) {
      for (std::size_t x = 0; x < 2; ++x) {
        const PromptId px(x);
        double max_win = 0.0;
        for (ResponseId y = 0; y < 6; ++y) {
          max_win = std::max(max_win, WinRateVsPolicy(o, px, y, pi));
        }
        const double log_z = LogPartition(pi, o, eta, px);
        EXPECT_GE(log_z, eta / 2.0 - 1e-12);
        EXPECT_LE(log_z, eta * max_win + 1e-12);
      }
    }
  }
}

TEST(ExponentialUpdateTest, HandComputedTwoByTwo) {
  const auto o = TwoByTwo(0.7);
  const auto next =
      ExponentialUpdate(TabularPolicy::Uniform(o.universe()), o, 1.0);
  const double z = 0.5 * std::exp(0.6) + 0.5 * std::exp(0.4);
  EXPECT_NEAR(next.Prob(PromptId(0), 0), 0.5 * std::exp(0.6) / z, 1e-15);
  EXPECT_NEAR(next.Prob(PromptId(0), 0), 0.54983, 1e-5);
  EXPECT_NEAR(next.Prob(PromptId(0), 1), 0.45017, 1e-5);
}

TEST(ExponentialUpdateTest, AllTiesLeavePolicyUnchanged) {
  const auto o = AllTieOracle(ResponseUniverse({4, 2}));
  const auto pi = RandomPolicy(o.universe(), 5);
  const auto next = ExponentialUpdate(pi, o, 2.0);
  for (std::size_t x = 0; x < 2; ++x) {
    EXPECT_LT(MaxAbsDifference(next.Row(PromptId(x)), pi.Row(PromptId(x))), 1e-15);
  }
}

TEST(ExponentialUpdateTest, ZeroEtaLeavesPolicyUnchanged) {
  const auto o = RandomMatrixOracle(2, 5, 3);
  const auto pi = RandomPolicy(o.universe(), 5);
  const auto next = ExponentialUpdate(pi, o, 0.0);
  for (std::size_t x = 0; x < 2; ++x) {
    EXPECT_LT(MaxAbsDifference(next.Row(PromptId(x)), pi.Row(PromptId(x))), 1e-15);
  }
}

TEST(ExponentialUpdateTest, PreservesSupportAndRanking) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto o = RandomMatrixOracle(1, 6, seed);
    const auto pi = TabularPolicy::FromProbabilities(
        {{0.1, 0.0, 0.3, 0.2, 0.0, 0.4}});
    const auto next = ExponentialUpdate(pi, o, 1.5);
    const PromptId x(0);
    for (ResponseId y = 0; y < 6; ++y) {
      EXPECT_EQ(pi.Prob(x, y) == 0.0, next.Prob(x, y) == 0.0);
    }
    const std::vector<ResponseId> support{0, 2, 3, 5};
    for (ResponseId a : support) {
      for (ResponseId b : support) {
        const double wa = WinRateVsPolicy(o, x, a, pi);
        const double wb = WinRateVsPolicy(o, x, b, pi);
        const double ra = next.Prob(x, a) / pi.Prob(x, a);
        const double rb = next.Prob(x, b) / pi.Prob(x, b);
        if (wa > wb + 1e-12) {
          EXPECT_GT(ra, rb);
        }
        if (ra > rb * (1.0 + 1e-12)) {
          EXPECT_GT(wa, wb);
        }
      }
    }
  }
}

TEST(ExponentialUpdateTest, NeverLosesToPredecessor) {
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    const auto o = RandomMatrixOracle(3, 7, seed);
    const auto pi = RandomPolicy(o.universe(), seed + 1, 2.0);
    for (double eta : {0.1, 1.0, 20.0}) {
      EXPECT_GE(PolicyVsPolicy(o, ExponentialUpdate(pi, o, eta), pi),
                0.5 - 1e-14);
    }
  }
}

TEST(ExponentialUpdateTest, LargeEtaStaysFinite) {
  const auto o = RandomMatrixOracle(1, 5, 2);
  auto pi = TabularPolicy::Uniform(o.universe());
  for (int t = 0; t < 50; ++t) pi = ExponentialUpdate(pi, o, 1000.0);
  double sum = 0.0;
  for (double p : pi.Row(PromptId(0))) {
    EXPECT_FALSE(std::isnan(p));
    sum += p;
  }
  EXPECT_NEAR(sum, 1.0, 1e-12);
}

TEST(DualityGapTest, RockPaperScissorsUniformIsZero) {
  const auto o = RockPaperScissors();
  EXPECT_NEAR(DualityGap(TabularPolicy::Uniform(o.universe()), o), 0.0, 1e-15);
}

TEST(DualityGapTest, RockPaperScissorsPureRockIsOne) {
  const auto o = RockPaperScissors();
  EXPECT_DOUBLE_EQ(
      DualityGap(TabularPolicy::PointMass(o.universe(), {0}), o), 1.0);
}

TEST(DualityGapTest, CondorcetWinnerPointMassByBruteForce) {
  // Response 0 beats response 1 with probability 0.7, so delta_0 is a
  // symmetric Nash equilibrium: the best reply wins 1/2, the worst reply
  // loses 1/2 and the gap vanishes.
  const auto o = TwoByTwo(0.7);
  const auto delta0 = TabularPolicy::PointMass(o.universe(), {0});
  EXPECT_DOUBLE_EQ(BruteForceGap(delta0, o), 0.0);
  EXPECT_DOUBLE_EQ(DualityGap(delta0, o), 0.0);
  // The dominated point mass is not an equilibrium.
  const auto delta1 = TabularPolicy::PointMass(o.universe(), {1});
  EXPECT_NEAR(DualityGap(delta1, o), 0.4, 1e-15);
}

TEST(DualityGapTest, MatchesBruteForceOnRandomPolicies) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto o = RandomMatrixOracle(3, 5, seed).WithPromptWeights({1, 2, 3});
    const auto pi = RandomPolicy(o.universe(), seed + 3, 2.0);
    const double gap = DualityGap(pi, o);
    EXPECT_GE(gap, 0.0);
    EXPECT_NEAR(gap, BruteForceGap(pi, o), 1e-14);
  }
}

TEST(DualityGapTest, IdentityWithMinimumLoss) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto o = RandomMatrixOracle(2, 6, seed);
    const auto pi = RandomPolicy(o.universe(), seed + 11, 3.0);
    EXPECT_NEAR(DualityGap(pi, o), 2.0 * (0.5 - MinLossAgainst(pi, o)), 1e-12);
  }
}

TEST(DualityGapTest, MixtureUsesMaterializedPolicy) {
  const auto o = RockPaperScissors();
  const auto u = o.universe();
  const MixturePolicy m({TabularPolicy::PointMass(u, {0}),
                         TabularPolicy::PointMass(u, {1}),
                         TabularPolicy::PointMass(u, {2})});
  EXPECT_NEAR(DualityGap(m, o), 0.0, 1e-15);
}

TEST(SolverConfigTest, Validation) {
  SolverConfig c;
  c.eta = 0.0;
  EXPECT_THROW(c.Validate(), InputError);
  c.eta = 1.0;
  c.t_max = 0;
  EXPECT_THROW(c.Validate(), InputError);
  c.t_max = 400;
  c.eta_schedule = EtaSchedule::kInverseSqrtT;
  c.eta_constant = 2.0;
  EXPECT_NO_THROW(c.Validate());
  EXPECT_DOUBLE_EQ(c.EffectiveEta(), 0.1);
}

TEST(RunMwuTest, RockPaperScissorsUniformIsFixedPoint) {
  const auto o = RockPaperScissors();
  SolverConfig c;
  c.t_max = 25;
  const auto result = RunMwu(TabularPolicy::Uniform(o.universe()), o, c);
  ASSERT_EQ(result.policies.size(), 25u);
  for (const auto& pi : result.policies) {
    for (ResponseId y = 0; y < 3; ++y) {
      EXPECT_NEAR(pi.Prob(PromptId(0), y), 1.0 / 3.0, 1e-15);
    }
  }
  for (const auto& r : result.trace.records) EXPECT_NEAR(r.gap, 0.0, 1e-15);
}

TEST(RunMwuTest, BradleyTerryMixtureConcentratesOnBestResponse) {
  const auto o = PreferenceOracle::FromRewards({{1.0, 0.0}});
  SolverConfig c;
  c.eta = 1.0;
  c.t_max = 100;
  const auto result = RunMwu(TabularPolicy::Uniform(o.universe()), o, c);
  const auto avg = result.mixture.Materialize();
  EXPECT_GT(avg.Prob(PromptId(0), 0), 0.9);
  EXPECT_GT(result.policies.back().Prob(PromptId(0), 0), 0.999);
  for (std::size_t i = 1; i < result.trace.records.size(); ++i) {
    EXPECT_LE(result.trace.records[i].gap,
              result.trace.records[i - 1].gap + 1e-15);
  }
  EXPECT_LT(result.trace.records.back().gap, result.trace.records.front().gap);
}

TEST(RunMwuTest, SingleRoundMixtureIsInitialPolicy) {
  const auto o = RandomMatrixOracle(2, 4, 1);
  const auto pi = RandomPolicy(o.universe(), 2);
  SolverConfig c;
  c.t_max = 1;
  const auto result = RunMwu(pi, o, c);
  EXPECT_EQ(result.mixture.size(), 1u);
  const auto avg = result.mixture.Materialize();
  for (std::size_t x = 0; x < 2; ++x) {
    EXPECT_LT(MaxAbsDifference(avg.Row(PromptId(x)), pi.Row(PromptId(x))), 1e-15);
  }
}

TEST(RunMwuTest, RejectsPartialSupport) {
  const auto o = TwoByTwo(0.6);
  EXPECT_THROW(RunMwu(TabularPolicy::PointMass(o.universe(), {0}), o, {}),
               InputError);
}

TEST(RunMwuTest, TraceMatchesDirectEvaluation) {
  const auto o = RandomMatrixOracle(2, 5, 8);
  SolverConfig c;
  c.eta = 0.3;
  c.t_max = 12;
  const auto result = RunMwu(TabularPolicy::Uniform(o.universe()), o, c);
  for (int t = 1; t <= c.t_max; ++t) {
    std::vector<TabularPolicy> prefix(result.policies.begin(),
                                      result.policies.begin() + t);
    const double gap = DualityGap(MixturePolicy(prefix), o);
    EXPECT_NEAR(result.trace.records[t - 1].gap, gap, 1e-14);
  }
  const auto csv = GapTraceCsv(result.trace);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), "t,gap,kl_step,fs_residual");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), c.t_max + 1);
}

TEST(FreundSchapireTest, SingleUniformRoundAgainstPureMinimum) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto o = RandomMatrixOracle(1, 5, seed);
    const auto u = TabularPolicy::Uniform(o.universe());
    const double eta = 1.0;
    const auto residual = FreundSchapireCheck({u}, o, eta);
    ASSERT_EQ(residual.size(), 1u);
    // Left side: P(u < u) = 1/2. Right side over pure responses.
    const double a = eta / (1.0 - std::exp(-eta));
    const double b = 1.0 / (1.0 - std::exp(-eta));
    double pure_min = 1e300;
    for (ResponseId y = 0; y < 5; ++y) {
      double loss = 0.0;
      for (ResponseId z = 0; z < 5; ++z) loss += o.Prob(PromptId(0), z, y) / 5.0;
      pure_min = std::min(pure_min, a * loss + b * std::log(5.0));
    }
    EXPECT_GE(residual[0], 0.0);
    EXPECT_LE(residual[0], pure_min - 0.5 + 1e-12);
  }
}

TEST(FreundSchapireTest, SimplexMinimumMatchesGridSearch) {
  const auto o = TwoByTwo(0.8);
  const double eta = 0.7;
  SolverConfig c;
  c.eta = eta;
  c.t_max = 6;
  const auto result = RunMwu(TabularPolicy::Uniform(o.universe()), o, c);
  const auto residual = FreundSchapireCheck(result.policies, o, eta);
  const double a = eta / (1.0 - std::exp(-eta));
  const double b = 1.0 / (1.0 - std::exp(-eta));
  double cum0 = 0.0;
  double cum1 = 0.0;
  for (int t = 1; t <= c.t_max; ++t) {
    const auto& pi = result.policies[t - 1];
    cum0 += 1.0 - WinRateVsPolicy(o, PromptId(0), 0, pi);
    cum1 += 1.0 - WinRateVsPolicy(o, PromptId(0), 1, pi);
    double best = 1e300;
    constexpr int kGrid = 200000;
    for (int i = 1; i < kGrid; ++i) {
      const double p = static_cast<double>(i) / kGrid;
      const double kl = p * std::log(2.0 * p) + (1 - p) * std::log(2.0 * (1 - p));
      best = std::min(best, a * (p * cum0 + (1 - p) * cum1) + b * kl);
    }
    const double lhs = 0.5 * t;
    EXPECT_NEAR(residual[t - 1] + lhs, best, 1e-8) << "t=" << t;
  }
}

TEST(FreundSchapireTest, RockPaperScissorsUniformRun) {
  const auto o = RockPaperScissors();
  SolverConfig c;
  c.t_max = 40;
  const auto result = RunMwu(TabularPolicy::Uniform(o.universe()), o, c);
  const double a = 1.0 / (1.0 - std::exp(-1.0));
  for (int t = 1; t <= c.t_max; ++t) {
    // Left side t/2; at pi = pi_0 the right side is a * t / 2.
    EXPECT_NEAR(result.trace.records[t - 1].fs_residual, (a - 1.0) * t / 2.0,
                1e-12);
  }
}

TEST(FreundSchapireTest, HoldsAcrossEtaSweep) {
  for (double eta : {0.1, 1.0, 10.0}) {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const auto o = RandomMatrixOracle(3, 6, seed);
      SolverConfig c;
      c.eta = eta;
      c.t_max = 30;
      const auto result =
          RunMwu(RandomPolicy(o.universe(), seed + 100), o, c);
      for (const auto& r : result.trace.records) {
        EXPECT_GE(r.fs_residual, -1e-9);
      }
    }
  }
}

TEST(BestOfNTest, SingleDrawEqualsPlainSampling) {
  const auto o = PreferenceOracle::RelativeFromRewards({{0.5, -1.0, 2.0, 0.0}});
  const auto pi = RandomPolicy(o.universe(), 4);
  for (std::uint64_t it = 0; it < 200; ++it) {
    const SampleKey key{77, it};
    EXPECT_EQ(BestOfNRerank(pi, o, PromptId(0), 1, key),
              SampleResponses(pi, PromptId(0), 1, key)[0]);
  }
}

TEST(BestOfNTest, PointMassAlwaysReturned) {
  const auto o = PreferenceOracle::RelativeFromRewards({{0.5, -1.0, 2.0}});
  const auto delta = TabularPolicy::PointMass(o.universe(), {1});
  for (std::size_t n : {1u, 4u, 16u}) {
    EXPECT_EQ(BestOfNRerank(delta, o, PromptId(0), n, {3, n}), 1u);
  }
}

TEST(BestOfNTest, SixteenDrawsBeatBase) {
  const auto bt = RandomBradleyTerryOracle(1, 8, 5, 1.0);
  const auto o = PreferenceOracle::RelativeFromRewards(bt.rewards());
  const auto pi = TabularPolicy::Uniform(o.universe());
  double total = 0.0;
  constexpr int kTrials = 10000;
  for (int i = 0; i < kTrials; ++i) {
    const ResponseId y = BestOfNRerank(pi, o, PromptId(0), 16, {9, static_cast<std::uint64_t>(i)});
    total += WinRateVsPolicy(o, PromptId(0), y, pi);
  }
  EXPECT_GE(total / kTrials, 0.5);
}

TEST(BestOfNTest, RequiresRelativeRewardOracle) {
  const auto o = TwoByTwo(0.6);
  EXPECT_THROW(BestOfNRerank(TabularPolicy::Uniform(o.universe()), o,
                             PromptId(0), 2, {}),
               UnsupportedOperationError);
}

}  // namespace
}  // namespace sppo
