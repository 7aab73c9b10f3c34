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

#include <cmath>
#include <vector>

#include "gtest/gtest.h"
#include "sppo/dataset.h"
#include "sppo/errors.h"
#include "sppo/exact_solver.h"
#include "sppo/games.h"
#include "sppo/losses.h"
#include "sppo/numeric.h"
#include "sppo/rng.h"

namespace sppo {
namespace {

DatasetEntry Entry(std::size_t x, ResponseId y, double p_hat, double w = 1.0) {
  DatasetEntry e;
  e.prompt = PromptId(x);
  e.response = y;
  e.estimate.value = p_hat;
  e.weight = w;
  return e;
}

ObjectiveFn SppoFn(const SoftmaxPolicy& like, const TabularPolicy& pi_t,
                   const PreferenceDataset& data, const RegressionTarget& target) {
  return [&like, &pi_t, &data, &target](std::span<const double> p,
                                        std::span<double> g) {
    const auto theta =
        SoftmaxPolicy::WithParams(like, std::vector<double>(p.begin(), p.end()));
    const LossReport r = SppoObjective(theta, pi_t, data, target);
    std::copy(r.gradient.begin(), r.gradient.end(), g.begin());
    return r.loss;
  };
}

ObjectiveFn PairFn(PairLoss (*loss)(double, double)) {
  return [loss](std::span<const double> p, std::span<double> g) {
    const PairLoss l = loss(p[0], p[1]);
    g[0] = l.grad_a;
    g[1] = l.grad_b;
    return l.value;
  };
}

TEST(SppoObjectiveTest, StationaryWhenAllTiesAndConstantBaseline) {
  const auto pi = RandomPolicy(ResponseUniverse({4, 3}), 2);
  PreferenceDataset data;
  for (std::size_t x = 0; x < 2; ++x) {
    for (ResponseId y = 0; y < (x == 0 ? 4u : 3u); ++y) data.entries.push_back(Entry(x, y, 0.5));
  }
  const auto report = SppoObjective(SoftmaxPolicy::FromPolicy(pi), pi, data,
                                    RegressionTarget::ConstantBaseline(1.0));
  EXPECT_NEAR(report.loss, 0.0, 1e-28);
  for (double g : report.gradient) EXPECT_NEAR(g, 0.0, 1e-15);
}

TEST(SppoObjectiveTest, SingleEntryHandValue) {
  const auto pi = TabularPolicy::Uniform(ResponseUniverse({3}));
  PreferenceDataset data;
  data.entries.push_back(Entry(0, 1, 0.6));
  const auto report = SppoObjective(SoftmaxPolicy::FromPolicy(pi), pi, data,
                                    RegressionTarget::ConstantBaseline(1.0));
  EXPECT_NEAR(report.loss, 0.01, 1e-15);
  ASSERT_EQ(report.residuals.size(), 1u);
  EXPECT_NEAR(report.residuals[0], -0.1, 1e-15);
}

TEST(SppoObjectiveTest, EntryOutsideSupportIsDomainError) {
  const auto pi_t = TabularPolicy::FromProbabilities({{1.0, 0.0}});
  const SoftmaxPolicy theta({{0.0, 0.0}});
  PreferenceDataset data;
  data.entries.push_back(Entry(0, 1, 0.3));
  EXPECT_THROW(SppoObjective(theta, pi_t, data,
                             RegressionTarget::ConstantBaseline(1.0)),
               DomainError);
}

TEST(SppoObjectiveTest, ConstantBaselineDefaultsToHalfEta) {
  const auto t = RegressionTarget::ConstantBaseline(3.0);
  EXPECT_EQ(t.Baseline(PromptId(0)), 1.5);
  const auto o = RegressionTarget::ConstantBaseline(1.0, std::log(std::exp(1.0) - 1.0));
  EXPECT_NEAR(o.Baseline(PromptId(4)), 0.5413248546129181, 1e-15);
}

TEST(SppoObjectiveTest, GradientMatchesFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto o = RandomMatrixOracle(2, 3, seed);
    const auto pi_t = RandomPolicy(o.universe(), seed + 1);
    const auto data = ExactDataset(pi_t, o);
    const auto target = RegressionTarget::ExactLogZ(
        1.0, EmpiricalLogPartition(pi_t, o, 1.0, data));
    const auto like = SoftmaxPolicy::FromPolicy(RandomPolicy(o.universe(), seed + 2));
    EXPECT_LT(GradientCheck(SppoFn(like, pi_t, data, target), like.params()), 1e-5);
  }
}

TEST(SppoObjectiveTest, ExactTargetsVanishAtExponentialUpdate) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto o = RandomMatrixOracle(3, 5, seed);
    const auto pi_t = RandomPolicy(o.universe(), seed + 9);
    const double eta = 1.3;
    const auto data = ExactDataset(pi_t, o);
    const auto target =
        RegressionTarget::ExactLogZ(eta, EmpiricalLogPartition(pi_t, o, eta, data));
    const auto next = ExponentialUpdate(pi_t, o, eta);
    const auto report =
        SppoObjective(SoftmaxPolicy::FromPolicy(next), pi_t, data, target);
    EXPECT_LT(report.loss, 1e-28);
  }
}

TEST(ExactDatasetTest, WeightsAndEstimates) {
  const auto o = RandomMatrixOracle(2, 4, 3).WithPromptWeights({1.0, 3.0});
  const auto pi = RandomPolicy(o.universe(), 4);
  const auto data = ExactDataset(pi, o);
  EXPECT_TRUE(data.exact);
  ASSERT_EQ(data.entries.size(), 8u);
  double total = 0.0;
  for (const auto& e : data.entries) {
    total += e.weight;
    EXPECT_NEAR(e.estimate.value, WinRateVsPolicy(o, e.prompt, e.response, pi), 1e-15);
  }
  EXPECT_NEAR(total, 1.0, 1e-15);
}

TEST(EmpiricalLogPartitionTest, SampledBatchAgainstDirectSum) {
  const auto o = RandomMatrixOracle(2, 5, 12);
  const auto pi = RandomPolicy(o.universe(), 13);
  PreferenceDataset data;
  data.batches = {{0, 3, 3, 1}, {}};
  data.entries.push_back(Entry(0, 3, 0.5));
  const double eta = 2.0;
  const auto log_z = EmpiricalLogPartition(pi, o, eta, data);
  double z = 0.0;
  for (ResponseId y = 0; y < 5; ++y) {
    double p_hat = 0.0;
    for (ResponseId s : data.batches[0]) p_hat += o.Prob(PromptId(0), y, s) / 4.0;
    z += pi.Prob(PromptId(0), y) * std::exp(eta * p_hat);
  }
  EXPECT_NEAR(log_z[0], std::log(z), 1e-14);
  EXPECT_TRUE(std::isnan(log_z[1]));
  const auto target = RegressionTarget::ExactLogZ(eta, log_z);
  EXPECT_THROW(target.Baseline(PromptId(1)), InputError);
}

TEST(SppoPairwiseLossTest, HardLabelFixedPoint) {
  EXPECT_DOUBLE_EQ(SppoPairwiseLoss(0.5, -0.5, 1.0).value, 0.0);
}

TEST(SppoPairwiseLossTest, ZeroLogRatiosHardLabel) {
  EXPECT_DOUBLE_EQ(SppoPairwiseLoss(0.0, 0.0, 1.0).value, 0.5);
}

TEST(SppoPairwiseLossTest, TieHasNoSignal) {
  const PairLoss l = SppoPairwiseLoss(0.0, 0.0, 0.5);
  EXPECT_DOUBLE_EQ(l.value, 0.0);
  EXPECT_DOUBLE_EQ(l.grad_a, 0.0);
  EXPECT_DOUBLE_EQ(l.grad_b, 0.0);
}

TEST(SppoPairwiseLossTest, NotShiftInvariant) {
  const double base = SppoPairwiseLoss(0.3, -0.1, 0.8).value;
  EXPECT_GT(std::abs(SppoPairwiseLoss(1.3, 0.9, 0.8).value - base), 0.1);
}

TEST(SppoPairwiseLossTest, RejectsBadProbability) {
  EXPECT_THROW(SppoPairwiseLoss(0.0, 0.0, 1.2), InputError);
}

TEST(DpoLossTest, KnownValues) {
  EXPECT_NEAR(DpoLoss(0.3, 0.3).value, std::log(2.0), 1e-15);
  EXPECT_NEAR(DpoLoss(std::log(3.0), 0.0).value, -std::log(0.75), 1e-15);
  EXPECT_NEAR(DpoLoss(std::log(3.0), 0.0).value, 0.2877, 1e-4);
  EXPECT_LT(DpoLoss(60.0, 0.0).value, 1e-25);
}

TEST(DpoLossTest, StrictlyDecreasingInGap) {
  double prev = DpoLoss(-20.0, 0.0).value;
  for (double d = -19.5; d <= 30.0; d += 0.5) {
    const double v = DpoLoss(d, 0.0).value;
    EXPECT_LT(v, prev);
    prev = v;
  }
}

TEST(IpoLossTest, KnownValuesAndShiftInvariance) {
  EXPECT_DOUBLE_EQ(IpoLoss(1.0, 0.0).value, 0.0);
  EXPECT_DOUBLE_EQ(IpoLoss(0.0, 0.0).value, 1.0);
  EXPECT_DOUBLE_EQ(IpoLoss(2.0, 0.0).value, 1.0);
  for (double c : {-3.0, 0.7, 12.0}) {
    EXPECT_NEAR(IpoLoss(0.4 + c, -0.3 + c).value, IpoLoss(0.4, -0.3).value, 1e-13);
  }
}

TEST(KtoLossTest, KnownValues) {
  EXPECT_DOUBLE_EQ(KtoLoss(0.2, 0.2, 0.2).value, 1.0);
  EXPECT_LT(KtoLoss(60.0, -60.0, 0.0).value, 1e-25);
  EXPECT_NEAR(KtoLoss(0.1 + std::log(3.0), 0.1, 0.1).value, 0.75, 1e-15);
}

TEST(KtoLossTest, MonotoneInArguments) {
  EXPECT_LT(KtoLoss(1.0, 0.0, 0.2).value, KtoLoss(0.5, 0.0, 0.2).value);
  EXPECT_GT(KtoLoss(0.5, 0.3, 0.2).value, KtoLoss(0.5, 0.0, 0.2).value);
  const PairLoss l = KtoLoss(0.4, -0.2, 0.1);
  EXPECT_LT(l.grad_a, 0.0);
  EXPECT_GT(l.grad_b, 0.0);
}

TEST(GradientCheckTest, QuadraticIsExact) {
  const ObjectiveFn quad = [](std::span<const double> p, std::span<double> g) {
    double v = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) {
      v += (i + 1.0) * p[i] * p[i] + p[i];
      g[i] = 2.0 * (i + 1.0) * p[i] + 1.0;
    }
    return v;
  };
  EXPECT_LT(GradientCheck(quad, std::vector<double>{0.3, -1.2, 2.5}), 1e-9);
}

TEST(GradientCheckTest, DpoAtZeroGap) {
  EXPECT_LT(GradientCheck(PairFn(&DpoLoss), std::vector<double>{0.2, 0.2}), 1e-6);
}

TEST(GradientCheckTest, DetectsWrongGradient) {
  const ObjectiveFn wrong = [](std::span<const double> p, std::span<double> g) {
    g[0] = 3.0 * p[0];
    return p[0] * p[0];
  };
  EXPECT_GT(GradientCheck(wrong, std::vector<double>{1.0}), 0.1);
}

TEST(GradientCheckTest, RejectsBadEpsilon) {
  const ObjectiveFn f = [](std::span<const double>, std::span<double> g) {
    g[0] = 0.0;
    return 0.0;
  };
  EXPECT_THROW(GradientCheck(f, std::vector<double>{1.0}, 0.0), InputError);
  EXPECT_THROW(GradientCheck(f, std::vector<double>{1.0}, 1e-2), InputError);
}

TEST(GradientCheckTest, AllPairLossesOnRandomInputs) {
  const CounterRng rng(5);
  for (int i = 0; i < 100; ++i) {
    const double a = 4.0 * rng.Uniform(i, 0) - 2.0;
    const double b = 4.0 * rng.Uniform(i, 1) - 2.0;
    const double c = 4.0 * rng.Uniform(i, 2) - 2.0;
    const double p = rng.Uniform(i, 3);
    const std::vector<double> ab{a, b};
    EXPECT_LT(GradientCheck(PairFn(&DpoLoss), ab), 1e-5);
    EXPECT_LT(GradientCheck(PairFn(&IpoLoss), ab), 1e-5);
    const ObjectiveFn sppo = [p](std::span<const double> v, std::span<double> g) {
      const PairLoss l = SppoPairwiseLoss(v[0], v[1], p, 1.7);
      g[0] = l.grad_a;
      g[1] = l.grad_b;
      return l.value;
    };
    EXPECT_LT(GradientCheck(sppo, ab), 1e-5);
    const ObjectiveFn kto = [](std::span<const double> v, std::span<double> g) {
      const PairLoss l = KtoLoss(v[0], v[1], v[2]);
      g[0] = l.grad_a;
      g[1] = l.grad_b;
      g[2] = l.grad_c;
      return l.value;
    };
    EXPECT_LT(GradientCheck(kto, std::vector<double>{a, b, c}), 1e-5);
  }
}

TEST(PairwiseObjectiveTest, GradientMatchesFiniteDifferences) {
  const auto o = RandomMatrixOracle(2, 4, 6);
  const auto pi_ref = RandomPolicy(o.universe(), 1);
  const std::vector<PreferenceTriplet> triplets{
      MakeTriplet(PromptId(0), 1, 3, 0.8), MakeTriplet(PromptId(1), 0, 2, 0.6),
      MakeTriplet(PromptId(1), 2, 2, 0.5)};
  const auto like = SoftmaxPolicy::FromPolicy(RandomPolicy(o.universe(), 2));
  for (PairwiseMethod m :
       {PairwiseMethod::kSppo, PairwiseMethod::kDpo, PairwiseMethod::kIpo}) {
    const ObjectiveFn f = [&](std::span<const double> p, std::span<double> g) {
      const auto theta =
          SoftmaxPolicy::WithParams(like, std::vector<double>(p.begin(), p.end()));
      const auto r = PairwiseObjective(theta, pi_ref, triplets, m, 2.0);
      std::copy(r.gradient.begin(), r.gradient.end(), g.begin());
      return r.loss;
    };
    EXPECT_LT(GradientCheck(f, like.params()), 1e-5) << PairwiseMethodName(m);
  }
}

TEST(PairwiseFixedPointTest, HardLabelDescentReachesHalfMinusHalf) {
  const ObjectiveFn f = [](std::span<const double> v, std::span<double> g) {
    const PairLoss l = SppoPairwiseLoss(v[0], v[1], 1.0);
    g[0] = l.grad_a;
    g[1] = l.grad_b;
    return l.value;
  };
  OptimizerSettings s;
  s.step_size = 0.1;
  s.line_search = false;
  const auto r = GradientDescent(f, {3.0, 2.0}, s);
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.params[0], 0.5, 1e-3);
  EXPECT_NEAR(r.params[1], -0.5, 1e-3);
}

TEST(FitIterationTest, AllTieDatasetLeavesPolicyUnchanged) {
  const auto o = AllTieOracle(ResponseUniverse({5}));
  const auto pi_t = RandomPolicy(o.universe(), 3);
  const auto data = ExactDataset(pi_t, o);
  const auto fit = FitIteration(pi_t, data, RegressionTarget::ConstantBaseline(1.0), {});
  EXPECT_TRUE(fit.converged);
  EXPECT_LT(TotalVariation(fit.policy.Realize().Row(PromptId(0)),
                           pi_t.Row(PromptId(0))),
            1e-6);
}

TEST(FitIterationTest, ZeroStepReturnsStartingPolicy) {
  const auto o = RandomMatrixOracle(1, 4, 9);
  const auto pi_t = RandomPolicy(o.universe(), 3);
  OptimizerSettings s;
  s.step_size = 0.0;
  const auto fit = FitIteration(pi_t, ExactDataset(pi_t, o),
                                RegressionTarget::ConstantBaseline(1.0), s);
  EXPECT_EQ(fit.steps, 0);
  EXPECT_LT(MaxAbsDifference(fit.policy.Realize().Row(PromptId(0)),
                             pi_t.Row(PromptId(0))),
            1e-15);
}

TEST(FitIterationTest, NonConvergenceIsReported) {
  const auto o = RandomMatrixOracle(1, 4, 9);
  const auto pi_t = TabularPolicy::Uniform(o.universe());
  OptimizerSettings s;
  s.max_steps = 1;
  s.grad_tol = 1e-14;
  const auto fit = FitIteration(pi_t, ExactDataset(pi_t, o),
                                RegressionTarget::ConstantBaseline(1.0), s);
  EXPECT_FALSE(fit.converged);
  EXPECT_EQ(fit.steps, 1);
  EXPECT_GT(fit.final_grad_norm, 1e-14);
}

TEST(FitIterationTest, RealizableTwoResponseFitMatchesUpdate) {
  SquareMatrix m(2, 0.5);
  m(0, 1) = 0.7;
  m(1, 0) = 0.3;
  const auto o = PreferenceOracle::FromMatrices({m});
  const auto pi_t = TabularPolicy::Uniform(o.universe());
  const auto data = ExactDataset(pi_t, o);
  const auto target =
      RegressionTarget::ExactLogZ(1.0, EmpiricalLogPartition(pi_t, o, 1.0, data));
  const auto fit = FitIteration(pi_t, data, target, {});
  EXPECT_TRUE(fit.converged);
  const auto next = ExponentialUpdate(pi_t, o, 1.0);
  EXPECT_LT(MaxAbsDifference(fit.policy.Realize().Row(PromptId(0)),
                             next.Row(PromptId(0))),
            1e-4);
}

TEST(FitIterationTest, CheckpointsAreKept) {
  const auto o = RandomMatrixOracle(1, 4, 9);
  const auto pi_t = TabularPolicy::Uniform(o.universe());
  OptimizerSettings s;
  s.max_steps = 10;
  s.grad_tol = 0.0;
  s.checkpoint_every = 3;
  const auto fit = FitIteration(pi_t, ExactDataset(pi_t, o),
                                RegressionTarget::ConstantBaseline(1.0), s);
  EXPECT_EQ(fit.checkpoints.size(), static_cast<std::size_t>(fit.steps / 3));
}

TEST(UnconstrainedLogRatioTest, RejectsNonFinite) {
  EXPECT_THROW(UnconstrainedLogRatio({{0.0, std::nan("")}}), InputError);
  const UnconstrainedLogRatio r({{0.5, -0.5}});
  EXPECT_EQ(r.at(PromptId(0), 1), -0.5);
}

// Independent evaluation of the square-form gradient: finite differences of
// G(theta) = sum_x w_x sum_y p_fixed(y|x) X_y(theta)^2 with the sampling
// weights frozen at the current theta.
std::vector<double> SquareFormByFiniteDifferences(
    const SoftmaxPolicy& theta, const TabularPolicy& pi_ref,
    const std::vector<std::vector<double>>& reward,
    const std::vector<double>& baseline, double eta,
    const std::vector<double>& w) {
  const TabularPolicy frozen = theta.Realize();
  const auto g_of = [&](const std::vector<double>& params) {
    const auto t = SoftmaxPolicy::WithParams(theta, params);
    double g = 0.0;
    for (std::size_t x = 0; x < w.size(); ++x) {
      const auto lp = t.LogProbs(PromptId(x));
      for (std::size_t y = 0; y < lp.size(); ++y) {
        const double adv = reward[x][y] -
                           (lp[y] - pi_ref.LogProb(PromptId(x), y)) / eta -
                           baseline[x];
        g += w[x] * frozen.Prob(PromptId(x), y) * adv * adv;
      }
    }
    return g;
  };
  std::vector<double> params = theta.params();
  std::vector<double> out(params.size());
  const double h = 1e-5;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double keep = params[i];
    params[i] = keep + h;
    const double up = g_of(params);
    params[i] = keep - h;
    const double down = g_of(params);
    params[i] = keep;
    out[i] = (eta / 2.0) * -(up - down) / (2.0 * h);
  }
  return out;
}

TEST(PolicyGradientEquivalenceTest, ZeroRewardAtReferenceGivesZero) {
  const auto pi = RandomPolicy(ResponseUniverse({4}), 1);
  const auto r = PolicyGradientEquivalence(SoftmaxPolicy::FromPolicy(pi), pi,
                                           {{0.0, 0.0, 0.0, 0.0}}, {0.0}, 1.0, {1.0});
  for (double g : r.lhs) EXPECT_NEAR(g, 0.0, 1e-16);
  for (double g : r.rhs) EXPECT_NEAR(g, 0.0, 1e-16);
}

TEST(PolicyGradientEquivalenceTest, TwoResponseEnumeration) {
  const auto u = TabularPolicy::Uniform(ResponseUniverse({2}));
  const auto r = PolicyGradientEquivalence(SoftmaxPolicy::FromPolicy(u), u,
                                           {{1.0, 0.0}}, {0.0}, 1.0, {1.0});
  // E[r grad log pi] = sum_y 0.5 r_y (e_y - 0.5) = (0.25, -0.25).
  EXPECT_NEAR(r.lhs[0], 0.25, 1e-15);
  EXPECT_NEAR(r.lhs[1], -0.25, 1e-15);
  EXPECT_LT(r.max_deviation, 1e-9);
}

TEST(PolicyGradientEquivalenceTest, BaselineShiftLeavesLhsUnchanged) {
  const ResponseUniverse univ({5, 3});
  const auto theta = SoftmaxPolicy::FromPolicy(RandomPolicy(univ, 2));
  const auto ref = RandomPolicy(univ, 3);
  const std::vector<std::vector<double>> reward{{0.1, 0.9, 0.3, 0.5, 0.2},
                                                {0.7, 0.1, 0.4}};
  const auto a = PolicyGradientEquivalence(theta, ref, reward, {0.0, 0.0}, 2.0, {0.5, 0.5});
  const auto b = PolicyGradientEquivalence(theta, ref, reward, {3.0, -1.5}, 2.0, {0.5, 0.5});
  EXPECT_LT(MaxAbsDifference(a.lhs, b.lhs), 1e-15);
}

TEST(PolicyGradientEquivalenceTest, SquareFormAgreesWithFiniteDifferences) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const ResponseUniverse univ({6, 4});
    const auto theta = SoftmaxPolicy::FromPolicy(RandomPolicy(univ, seed));
    const auto ref = RandomPolicy(univ, seed + 50);
    const CounterRng rng(seed);
    std::vector<std::vector<double>> reward{std::vector<double>(6),
                                            std::vector<double>(4)};
    for (std::size_t x = 0; x < 2; ++x) {
      for (std::size_t y = 0; y < reward[x].size(); ++y) reward[x][y] = rng.Uniform(x, y);
    }
    const std::vector<double> baseline{0.4, 0.6};
    const std::vector<double> w{0.3, 0.7};
    const double eta = 1.5;
    const auto r = PolicyGradientEquivalence(theta, ref, reward, baseline, eta, w);
    EXPECT_LT(r.max_deviation, 1e-9);
    const auto fd = SquareFormByFiniteDifferences(theta, ref, reward, baseline, eta, w);
    EXPECT_LT(MaxAbsDifference(r.rhs, fd), 1e-8);
  }
}

}  // namespace
}  // namespace sppo
