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

// sppo_lab: command-line front end. Each subcommand writes CSV tables and a
// summary.json into --out and exits nonzero on bad input (2) or on a failed
// run-time invariant (1).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nlohmann/json.hpp"
#include "sppo/errors.h"
#include "sppo/exact_solver.h"
#include "sppo/games.h"
#include "sppo/io.h"
#include "sppo/losses.h"
#include "sppo/partition_lab.h"
#include "sppo/rng.h"
#include "sppo/selfplay.h"
#include "sppo/token_mdp.h"

namespace sppo {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::json;

constexpr double kFsResidualFloor = -1e-9;
constexpr double kProbabilityTol = 1e-9;
constexpr double kTokenIdentityTol = 1e-10;
constexpr double kGradRelTol = 1e-5;

struct Common {
  std::uint64_t seed = 0;
  bool seed_given = false;
  std::string out = "sppo_out";
};

// Collects failed invariants; the process exit code is derived from it.
class InvariantLog {
 public:
  void Check(bool ok, const std::string& what) {
    if (!ok) failures_.push_back(what);
  }
  bool ok() const { return failures_.empty(); }
  json ToJson() const { return failures_; }

 private:
  std::vector<std::string> failures_;
};

int Finish(const Common& common, json summary, const InvariantLog& log) {
  summary["seed"] = common.seed;
  summary["invariants_ok"] = log.ok();
  summary["invariant_failures"] = log.ToJson();
  WriteTextFile(fs::path(common.out) / "summary.json", summary.dump(2) + "\n");
  for (const auto& f : summary["invariant_failures"]) {
    std::cerr << "invariant violated: " << f.get<std::string>() << "\n";
  }
  std::cout << "wrote " << common.out << "\n";
  return log.ok() ? 0 : 1;
}

void CheckReports(const std::vector<IterationReport>& reports,
                  InvariantLog& log) {
  for (const IterationReport& r : reports) {
    const std::string t = "iteration " + std::to_string(r.t);
    log.Check(r.win_rate_vs_previous >= 0.0 && r.win_rate_vs_previous <= 1.0,
              t + ": win rate outside [0, 1]");
    log.Check(r.duality_gap >= -kProbabilityTol && r.duality_gap <= 1.0 + kProbabilityTol,
              t + ": duality gap outside [0, 1]");
    log.Check(r.kl_step >= -kProbabilityTol, t + ": negative KL step");
  }
}

json ReportsJson(const std::vector<IterationReport>& reports) {
  json out = json::array();
  for (const IterationReport& r : reports) {
    out.push_back({{"t", r.t},
                   {"win_rate_vs_previous", r.win_rate_vs_previous},
                   {"win_rate_vs_initial", r.win_rate_vs_initial},
                   {"duality_gap", r.duality_gap},
                   {"mixture_gap", r.mixture_gap},
                   {"fit_converged", r.fit.converged}});
  }
  return out;
}

Experiment LoadWithSeed(const std::string& path, const Common& common) {
  Experiment e = LoadExperiment(path);
  if (common.seed_given) e.config.seed = common.seed;
  return e;
}

int SolveExact(const Common& common, const std::string& game, double eta,
               int t_max, const std::string& init) {
  const PreferenceOracle oracle = LoadOracleSpec(game);
  SolverConfig config;
  config.eta = eta;
  config.t_max = t_max;
  TabularPolicy pi_1;
  if (init == "uniform") {
    pi_1 = TabularPolicy::Uniform(oracle.universe());
  } else if (init == "random") {
    pi_1 = RandomPolicy(oracle.universe(), common.seed);
  } else {
    throw InputError("--init must be 'uniform' or 'random'");
  }
  const MwuResult r = RunMwu(pi_1, oracle, config);
  const fs::path out(common.out);
  WriteTextFile(out / "gap_trace.csv", GapTraceCsv(r.trace));
  WriteTextFile(out / "final_policy.json", SerializePolicySnapshot(r.policies.back()));
  WriteTextFile(out / "mixture_policy.json",
                SerializePolicySnapshot(r.mixture.Materialize()));

  InvariantLog log;
  double min_residual = 0.0;
  for (const GapRecord& rec : r.trace.records) {
    min_residual = std::min(min_residual, rec.fs_residual);
  }
  log.Check(min_residual >= kFsResidualFloor,
            "regret inequality residual below tolerance");
  const double final_gap = DualityGap(r.policies.back(), oracle);
  return Finish(common,
                {{"command", "solve-exact"},
                 {"eta", r.eta},
                 {"t_max", t_max},
                 {"mixture_gap", r.trace.records.back().gap},
                 {"last_iterate_gap", final_gap},
                 {"min_fs_residual", min_residual}},
                log);
}

int SelfPlay(const Common& common, const std::string& path) {
  const Experiment e = LoadWithSeed(path, common);
  const SelfPlayResult r = RunSelfPlay(e.oracle, e.config);
  const fs::path out(common.out);
  WriteTextFile(out / "iterations.csv", IterationReportsCsv(r.reports));
  for (std::size_t t = 0; t < r.policies.size(); ++t) {
    WriteTextFile(out / ("policy_" + std::to_string(t + 1) + ".json"),
                  SerializePolicySnapshot(r.policies[t]));
  }
  InvariantLog log;
  CheckReports(r.reports, log);
  return Finish(common,
                {{"command", "selfplay"},
                 {"method", TrainingMethodName(e.config.method)},
                 {"iterations", ReportsJson(r.reports)}},
                log);
}

int Compare(const Common& common, const std::string& path,
            const std::vector<std::string>& method_names) {
  const Experiment e = LoadWithSeed(path, common);
  std::vector<TrainingMethod> methods;
  for (const std::string& m : method_names) methods.push_back(ParseTrainingMethod(m));
  const MethodTable table = CompareMethods(e.oracle, e.config, methods);
  WriteTextFile(fs::path(common.out) / "win_rates.csv", MethodTableCsv(table));
  InvariantLog log;
  const std::size_t n = table.labels.size();
  json vs_base = json::object();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      log.Check(std::abs(table.win_rates(i, j) + table.win_rates(j, i) - 1.0) <=
                    kProbabilityTol,
                "win-rate table is not antisymmetric");
    }
    vs_base[table.labels[i]] = table.win_rates(i, 0);
  }
  return Finish(common, {{"command", "compare"}, {"win_rate_vs_base", vs_base}}, log);
}

int AblateK(const Common& common, const std::string& path,
            const std::vector<std::size_t>& ks) {
  const Experiment e = LoadWithSeed(path, common);
  const AblationResult r = KAblation(e.oracle, e.config, ks);
  const std::string csv = "k," + IterationReportsCsv({});
  std::string body;
  InvariantLog log;
  json runs = json::array();
  for (std::size_t i = 0; i < r.k_values.size(); ++i) {
    const std::string table = IterationReportsCsv(r.runs[i].reports);
    std::size_t pos = table.find('\n') + 1;
    while (pos < table.size()) {
      const std::size_t end = table.find('\n', pos);
      body += std::to_string(r.k_values[i]) + "," + table.substr(pos, end - pos + 1);
      pos = end + 1;
    }
    CheckReports(r.runs[i].reports, log);
    runs.push_back({{"k", r.k_values[i]},
                    {"final_duality_gap", r.runs[i].reports.back().duality_gap},
                    {"final_win_rate_vs_initial",
                     r.runs[i].reports.back().win_rate_vs_initial}});
  }
  WriteTextFile(fs::path(common.out) / "ablation.csv", csv + body);
  return Finish(common, {{"command", "ablate-k"}, {"runs", runs}}, log);
}

int PartitionLab(const Common& common, const std::string& regime_name,
                 const std::vector<std::size_t>& ks, double eta, int trials) {
  const Regime regime = ParseRegime(regime_name);
  if (trials < 1) throw InputError("--trials must be >= 1");
  std::vector<PartitionRecord> records;
  InvariantLog log;
  json rows = json::array();
  const auto add = [&](std::size_t k, const char* stat, double value) {
    records.push_back({regime, k, eta, common.seed, stat, value});
  };
  for (std::size_t k : ks) {
    const double kd = static_cast<double>(k);
    if (regime == Regime::kDisordered) {
      double sum = 0.0, sum_sq = 0.0;
      for (int i = 0; i < trials; ++i) {
        const double z = DisorderedPartition(DisorderedInstance::Sample(
            k, eta, common.seed * 1000003ULL + static_cast<std::uint64_t>(i)));
        sum += z;
        sum_sq += z * z;
      }
      const double mean = sum / trials;
      const double var = trials > 1 ? (sum_sq / trials - mean * mean) * trials / (trials - 1) : 0.0;
      const DisorderedMoments m = ComputeDisorderedMoments(k, eta);
      add(k, "mean_z", mean);
      add(k, "sd_z", std::sqrt(std::max(var, 0.0)));
      add(k, "normalized_mean", mean * std::exp(-eta / 2.0));
      add(k, "row_mean", m.mean);
      add(k, "row_variance", m.variance);
      add(k, "row_covariance", m.covariance);
      log.Check(mean > 0.0 && std::isfinite(mean), "nonpositive partition estimate");
      rows.push_back({{"K", k}, {"mean_z", mean},
                      {"normalized_mean", mean * std::exp(-eta / 2.0)}});
    } else {
      const double log_z = OrderedLogPartition(OrderedInstance::Identity(k, eta));
      const double limit = OrderedLimit(eta);
      add(k, "log_z", log_z);
      add(k, "limit", limit);
      add(k, "abs_error", std::abs(log_z - limit));
      if (kd >= 10.0 * eta) {
        log.Check(std::abs(log_z - limit) <= eta / kd,
                  "ordered log Z outside the eta/K band at K=" + std::to_string(k));
      }
      log.Check(log_z >= eta / 2.0 - 1e-12, "ordered log Z below eta/2");
      rows.push_back({{"K", k}, {"log_z", log_z}, {"limit", limit}});
    }
  }
  WriteTextFile(fs::path(common.out) / "partition.csv", PartitionCsv(records));
  return Finish(common,
                {{"command", "partition-lab"},
                 {"regime", RegimeName(regime)},
                 {"eta", eta},
                 {"baseline", RegimeBaseline(eta, regime)},
                 {"results", rows}},
                log);
}

int TokenMdpCommand(const Common& common, const std::string& path) {
  const TokenMdp mdp = ParseTokenMdpSpec(ReadTextFile(path));
  const SoftValueTables tables = SoftBackup(mdp);
  const TokenPolicy optimal = OptimalTokenPolicy(mdp, tables);
  const double value_err = VerifyValueIdentity(mdp, tables);
  const double backup_err = BackupConsistency(mdp, tables);
  const double seq_err = SequenceEquivalence(mdp, optimal);
  const double row_err = optimal.MaxRowDeviation();

  std::string csv = "sequence,tokens,reward,log_ref,log_optimal\n";
  for (std::size_t s = 0; s < mdp.num_sequences(); ++s) {
    std::string tokens;
    for (int a : mdp.SequenceTokens(s)) {
      if (!tokens.empty()) tokens += ' ';
      tokens += std::to_string(a);
    }
    csv += std::to_string(s) + "," + tokens + "," + FormatDouble(mdp.Reward(s)) +
           "," + FormatDouble(mdp.SequenceLogRef(s)) + "," +
           FormatDouble(optimal.SequenceLogProb(s)) + "\n";
  }
  WriteTextFile(fs::path(common.out) / "sequences.csv", csv);

  InvariantLog log;
  log.Check(value_err <= kTokenIdentityTol, "soft value identity");
  log.Check(seq_err <= kTokenIdentityTol, "sequence/token equivalence");
  log.Check(row_err <= kTokenIdentityTol, "optimal policy rows do not sum to 1");
  return Finish(common,
                {{"command", "token-mdp"},
                 {"vocab", mdp.vocab()},
                 {"horizon", mdp.horizon()},
                 {"eta", mdp.eta()},
                 {"initial_value", tables.InitialValue()},
                 {"value_identity_error", value_err},
                 {"backup_consistency_error", backup_err},
                 {"sequence_equivalence_error", seq_err}},
                log);
}

ObjectiveFn PairObjective(std::function<PairLoss(std::span<const double>)> f,
                          bool with_c) {
  return [f, with_c](std::span<const double> v, std::span<double> g) {
    const PairLoss l = f(v);
    g[0] = l.grad_a;
    g[1] = l.grad_b;
    if (with_c) g[2] = l.grad_c;
    return l.value;
  };
}

int GradCheck(const Common& common, int trials) {
  if (trials < 1) throw InputError("--trials must be >= 1");
  const CounterRng rng(common.seed);
  const char* names[] = {"sppo_objective", "sppo_pairwise", "dpo", "ipo", "kto",
                         "sppo_token"};
  double worst[6] = {0, 0, 0, 0, 0, 0};
  for (int i = 0; i < trials; ++i) {
    const auto u = [&](int c) { return rng.Uniform(i, c, 0, 71); };
    const std::uint64_t base = common.seed * 7919ULL + i * 13ULL;
    const std::size_t n = 2 + i % 7;
    const auto oracle = RandomMatrixOracle(2, n, base);
    const auto pi_t = RandomPolicy(oracle.universe(), base + 1);
    const auto like = SoftmaxPolicy::FromPolicy(RandomPolicy(oracle.universe(), base + 2));
    const auto data = ExactDataset(pi_t, oracle);
    const auto target = RegressionTarget::ConstantBaseline(0.2 + 3.0 * u(0));
    const ObjectiveFn objective = [&](std::span<const double> p, std::span<double> g) {
      const LossReport r = SppoObjective(
          SoftmaxPolicy::WithParams(like, std::vector<double>(p.begin(), p.end())),
          pi_t, data, target);
      std::copy(r.gradient.begin(), r.gradient.end(), g.begin());
      return r.loss;
    };
    worst[0] = std::max(worst[0], GradientCheck(objective, like.params()));

    const std::vector<double> abc{4.0 * u(1) - 2.0, 4.0 * u(2) - 2.0, 4.0 * u(3) - 2.0};
    const std::vector<double> ab(abc.begin(), abc.begin() + 2);
    const double p = u(4);
    const double eta = 0.2 + 3.0 * u(5);
    worst[1] = std::max(worst[1], GradientCheck(PairObjective([&](auto v) {
      return SppoPairwiseLoss(v[0], v[1], p, eta); }, false), ab));
    worst[2] = std::max(worst[2], GradientCheck(PairObjective([](auto v) {
      return DpoLoss(v[0], v[1]); }, false), ab));
    worst[3] = std::max(worst[3], GradientCheck(PairObjective([](auto v) {
      return IpoLoss(v[0], v[1]); }, false), ab));
    worst[4] = std::max(worst[4], GradientCheck(PairObjective([](auto v) {
      return KtoLoss(v[0], v[1], v[2]); }, true), abc));

    const int vocab = 2 + i % 2;
    const int horizon = 1 + i % 3;
    const TokenMdp mdp = TokenMdp::Random(vocab, horizon, eta, base + 3);
    const TokenPolicy optimal = OptimalTokenPolicy(mdp, SoftBackup(mdp));
    const auto theta0 = TokenSoftmaxPolicy::FromPolicy(
        TokenPolicy(vocab, TokenMdp::Random(vocab, horizon, eta, base + 4).log_ref()));
    const ObjectiveFn token = [&](std::span<const double> v, std::span<double> g) {
      const TokenLossReport r = SppoTokenLoss(
          TokenSoftmaxPolicy(vocab, horizon, std::vector<double>(v.begin(), v.end())),
          mdp, optimal);
      std::copy(r.gradient.begin(), r.gradient.end(), g.begin());
      return r.loss;
    };
    worst[5] = std::max(worst[5], GradientCheck(token, theta0.params()));
  }
  std::string csv = "loss,trials,max_relative_error\n";
  json errors = json::object();
  InvariantLog log;
  for (int i = 0; i < 6; ++i) {
    csv += std::string(names[i]) + "," + std::to_string(trials) + "," +
           FormatDouble(worst[i]) + "\n";
    errors[names[i]] = worst[i];
    log.Check(worst[i] < kGradRelTol, std::string(names[i]) + " gradient mismatch");
  }
  WriteTextFile(fs::path(common.out) / "grad_check.csv", csv);
  return Finish(common, {{"command", "grad-check"}, {"max_relative_error", errors}},
                log);
}

void AddCommon(CLI::App* app, Common& common) {
  app->add_option("--seed", common.seed, "Random seed")
      ->each([&common](const std::string&) { common.seed_given = true; });
  app->add_option("--out", common.out, "Output directory");
}

int Main(int argc, char** argv) {
  CLI::App app{"Self-play preference optimisation lab"};
  app.require_subcommand(1);
  Common common;

  std::string game, config_path, spec_path;
  double eta = 1.0;
  int t_max = 100;
  std::string init = "uniform";
  auto* solve = app.add_subcommand("solve-exact", "Exact multiplicative-weights solve");
  solve->add_option("game", game, "Game spec (JSON)")->required();
  solve->add_option("--eta", eta, "Step size");
  solve->add_option("--t-max", t_max, "Iterations");
  solve->add_option("--init", init, "Initial policy: uniform or random");
  AddCommon(solve, common);

  auto* selfplay = app.add_subcommand("selfplay", "Run iterative self-play");
  selfplay->add_option("config", config_path, "Experiment config (JSON)")->required();
  AddCommon(selfplay, common);

  std::vector<std::string> methods{"sppo", "dpo", "ipo"};
  auto* compare = app.add_subcommand("compare", "Head-to-head method table");
  compare->add_option("config", config_path, "Experiment config (JSON)")->required();
  compare->add_option("--methods", methods, "Methods")->delimiter(',');
  AddCommon(compare, common);

  std::vector<std::size_t> ks{2, 3, 5};
  auto* ablate = app.add_subcommand("ablate-k", "Estimation batch ablation");
  ablate->add_option("config", config_path, "Experiment config (JSON)")->required();
  ablate->add_option("--k", ks, "Batch sizes")->delimiter(',');
  AddCommon(ablate, common);

  std::string regime = "disordered";
  std::vector<std::size_t> k_list{10, 100, 1000};
  double lab_eta = 1.0;
  int trials = 1000;
  auto* partition = app.add_subcommand("partition-lab", "Partition function regimes");
  partition->add_option("--regime", regime, "disordered or ordered");
  partition->add_option("--k-list", k_list, "Response counts")->delimiter(',');
  partition->add_option("--eta", lab_eta, "Step size");
  partition->add_option("--trials", trials, "Random instances per K");
  AddCommon(partition, common);

  auto* token = app.add_subcommand("token-mdp", "Soft backup on a token MDP");
  token->add_option("spec", spec_path, "Token MDP spec (JSON)")->required();
  AddCommon(token, common);

  int grad_trials = 100;
  auto* grad = app.add_subcommand("grad-check", "Finite-difference gradient checks");
  grad->add_option("--trials", grad_trials, "Random inputs per loss");
  AddCommon(grad, common);

  CLI11_PARSE(app, argc, argv);

  try {
    if (*solve) return SolveExact(common, game, eta, t_max, init);
    if (*selfplay) return SelfPlay(common, config_path);
    if (*compare) return Compare(common, config_path, methods);
    if (*ablate) return AblateK(common, config_path, ks);
    if (*partition) return PartitionLab(common, regime, k_list, lab_eta, trials);
    if (*token) return TokenMdpCommand(common, spec_path);
    if (*grad) return GradCheck(common, grad_trials);
  } catch (const InvariantViolation& e) {
    std::cerr << "invariant violated: " << e.what() << "\n";
    return 1;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}

}  // namespace
}  // namespace sppo

int main(int argc, char** argv) { return sppo::Main(argc, argv); }
