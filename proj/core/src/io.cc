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

#include "sppo/io.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <cstdio>
#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "sppo/errors.h"
#include "sppo/games.h"

namespace sppo {
namespace {

using nlohmann::json;

json ParseJson(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed JSON: ") + e.what());
  }
}

void RejectUnknownKeys(const json& object, const std::set<std::string>& known,
                       const std::string& where) {
  if (!object.is_object()) throw InputError(where + " must be a JSON object");
  for (const auto& item : object.items()) {
    if (!known.contains(item.key())) {
      throw InputError("unknown key '" + item.key() + "' in " + where);
    }
  }
}

template <typename T>
T Get(const json& object, const char* key, T fallback) {
  if (!object.contains(key)) return fallback;
  try {
    return object.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InputError(std::string("bad value for '") + key + "': " + e.what());
  }
}

template <typename T>
T Require(const json& object, const char* key) {
  if (!object.contains(key)) {
    throw InputError(std::string("missing required key '") + key + "'");
  }
  return Get<T>(object, key, T{});
}

double JsonNumber(const json& value) {
  if (value.is_number()) return value.get<double>();
  if (value.is_string()) {
    const std::string s = value.get<std::string>();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "inf") return std::numeric_limits<double>::infinity();
  }
  throw InputError("expected a number");
}

std::vector<double> NumberRow(const json& value) {
  if (!value.is_array()) throw InputError("expected an array of numbers");
  std::vector<double> row;
  row.reserve(value.size());
  for (const json& v : value) row.push_back(JsonNumber(v));
  return row;
}

std::vector<std::vector<double>> NumberRows(const json& value) {
  if (!value.is_array()) throw InputError("expected an array of arrays");
  std::vector<std::vector<double>> rows;
  for (const json& v : value) rows.push_back(NumberRow(v));
  return rows;
}

SquareMatrix ToMatrix(const std::vector<std::vector<double>>& rows) {
  SquareMatrix m(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != rows.size()) throw InputError("matrix must be square");
    for (std::size_t j = 0; j < rows.size(); ++j) m(i, j) = rows[i][j];
  }
  return m;
}

std::vector<SquareMatrix> MatrixList(const json& data) {
  if (!data.is_array()) throw InputError("oracle data must be an array");
  std::vector<SquareMatrix> out;
  for (const json& m : data) out.push_back(ToMatrix(NumberRows(m)));
  return out;
}

json MatrixJson(const SquareMatrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    rows.push_back(std::vector<double>(m.row(i).begin(), m.row(i).end()));
  }
  return rows;
}

PreferenceOracle OracleFromJson(const json& spec) {
  RejectUnknownKeys(spec,
                    {"prompts", "responses_per_prompt", "oracle",
                     "prompt_weights", "tokens"},
                    "game spec");
  if (!spec.contains("oracle")) throw InputError("game spec needs an 'oracle'");
  const json& o = spec.at("oracle");
  RejectUnknownKeys(o, {"kind", "data", "seed", "scale"}, "oracle");
  const std::string kind = Require<std::string>(o, "kind");
  const auto prompts = Get<std::size_t>(spec, "prompts", 0);
  std::vector<std::size_t> responses;
  if (spec.contains("responses_per_prompt")) {
    const json& r = spec.at("responses_per_prompt");
    responses = r.is_array() ? Get<std::vector<std::size_t>>(
                                   spec, "responses_per_prompt", {})
                             : std::vector<std::size_t>(
                                   prompts == 0 ? 1 : prompts,
                                   Get<std::size_t>(spec, "responses_per_prompt", 0));
  }

  std::optional<PreferenceOracle> oracle;
  if (kind == "matrix") {
    oracle = PreferenceOracle::FromMatrices(MatrixList(o.at("data")));
  } else if (kind == "bradley_terry") {
    oracle = PreferenceOracle::FromRewards(NumberRows(o.at("data")));
  } else if (kind == "relative_reward") {
    oracle = PreferenceOracle::FromRelativeScores(MatrixList(o.at("data")));
  } else if (kind == "relative_bradley_terry") {
    oracle = PreferenceOracle::RelativeFromRewards(NumberRows(o.at("data")));
  } else if (kind == "random_matrix" || kind == "random_bradley_terry") {
    if (prompts == 0 || responses.empty() ||
        std::adjacent_find(responses.begin(), responses.end(),
                           std::not_equal_to<>()) != responses.end()) {
      throw InputError(
          "generated games need prompts and one common responses_per_prompt");
    }
    const auto seed = Get<std::uint64_t>(o, "seed", 0);
    oracle = kind == "random_matrix"
                 ? RandomMatrixOracle(prompts, responses[0], seed)
                 : RandomBradleyTerryOracle(prompts, responses[0], seed,
                                            Get<double>(o, "scale", 1.0));
  } else if (kind == "rock_paper_scissors") {
    oracle = RockPaperScissors(prompts == 0 ? 1 : prompts);
  } else {
    throw InputError("unknown oracle kind '" + kind + "'");
  }

  if (prompts != 0 && oracle->num_prompts() != prompts) {
    throw InputError("'prompts' does not match the oracle data");
  }
  if (!responses.empty() && responses != oracle->universe().counts()) {
    throw InputError("'responses_per_prompt' does not match the oracle data");
  }
  if (spec.contains("prompt_weights")) {
    *oracle = oracle->WithPromptWeights(NumberRow(spec.at("prompt_weights")));
  }
  if (spec.contains("tokens")) {
    ResponseUniverse universe = oracle->universe();
    try {
      universe.set_tokens(
          spec.at("tokens").get<std::vector<std::vector<std::vector<int>>>>());
    } catch (const json::exception& e) {
      throw InputError(std::string("bad token table: ") + e.what());
    }
    *oracle = oracle->WithUniverse(std::move(universe));
  }
  return *oracle;
}

template <typename Enum>
Enum ParseEnum(const json& object, const char* key, Enum fallback,
               std::initializer_list<std::pair<const char*, Enum>> names) {
  if (!object.contains(key)) return fallback;
  const std::string value = Get<std::string>(object, key, "");
  for (const auto& [name, e] : names) {
    if (value == name) return e;
  }
  throw InputError(std::string("bad value '") + value + "' for '" + key + "'");
}

OptimizerSettings OptimizerFromJson(const json& o) {
  RejectUnknownKeys(o,
                    {"step_size", "max_steps", "grad_tol", "line_search", "mode",
                     "baseline_override", "checkpoint_every"},
                    "optimizer");
  OptimizerSettings s;
  s.step_size = Get<double>(o, "step_size", s.step_size);
  s.max_steps = Get<int>(o, "max_steps", s.max_steps);
  s.grad_tol = Get<double>(o, "grad_tol", s.grad_tol);
  s.line_search = Get<bool>(o, "line_search", s.line_search);
  s.mode = ParseEnum(o, "mode", s.mode,
                     {{"exact_logZ", BaselineMode::kExactLogZ},
                      {"constant_baseline", BaselineMode::kConstantBaseline}});
  if (o.contains("baseline_override")) {
    s.baseline_override = Get<double>(o, "baseline_override", 0.0);
  }
  s.checkpoint_every = Get<int>(o, "checkpoint_every", 0);
  return s;
}

}  // namespace

PreferenceOracle ParseOracleSpec(const std::string& text) {
  return OracleFromJson(ParseJson(text));
}

PreferenceOracle LoadOracleSpec(const std::filesystem::path& path) {
  return ParseOracleSpec(ReadTextFile(path));
}

std::string SerializeOracleSpec(const PreferenceOracle& oracle) {
  json spec;
  spec["prompts"] = oracle.num_prompts();
  json o;
  switch (oracle.kind()) {
    case OracleKind::kMatrix:
    case OracleKind::kRelativeReward: {
      o["kind"] = oracle.kind() == OracleKind::kMatrix ? "matrix"
                                                       : "relative_reward";
      json data = json::array();
      for (const SquareMatrix& m : oracle.tables()) data.push_back(MatrixJson(m));
      o["data"] = std::move(data);
      break;
    }
    case OracleKind::kBradleyTerry:
      o["kind"] = "bradley_terry";
      o["data"] = oracle.rewards();
      break;
  }
  spec["oracle"] = std::move(o);
  spec["prompt_weights"] = oracle.prompt_weights();
  const ResponseUniverse& universe = oracle.universe();
  spec["responses_per_prompt"] = universe.counts();
  if (universe.has_tokens()) {
    json tokens = json::array();
    for (std::size_t x = 0; x < universe.num_prompts(); ++x) {
      json row = json::array();
      for (std::size_t y = 0; y < universe.num_responses(PromptId(x)); ++y) {
        row.push_back(universe.tokens(PromptId(x), y));
      }
      tokens.push_back(std::move(row));
    }
    spec["tokens"] = std::move(tokens);
  }
  return spec.dump(2) + "\n";
}

std::string SerializePolicySnapshot(const TabularPolicy& policy) {
  json rows = json::array();
  for (const auto& row : policy.log_rows()) {
    json r = json::array();
    for (double v : row) {
      if (std::isinf(v)) {
        r.push_back(v < 0 ? "-inf" : "inf");
      } else {
        r.push_back(v);
      }
    }
    rows.push_back(std::move(r));
  }
  json out;
  out["log_probs"] = std::move(rows);
  return out.dump() + "\n";
}

TabularPolicy ParsePolicySnapshot(const std::string& text) {
  const json doc = ParseJson(text);
  RejectUnknownKeys(doc, {"log_probs"}, "policy snapshot");
  if (!doc.contains("log_probs")) throw InputError("snapshot needs 'log_probs'");
  return TabularPolicy::FromLogProbabilities(NumberRows(doc.at("log_probs")));
}

TokenMdp ParseTokenMdpSpec(const std::string& text) {
  const json doc = ParseJson(text);
  RejectUnknownKeys(doc, {"vocab", "horizon", "eta", "pi_ref", "reward", "seed"},
                    "token MDP spec");
  const int vocab = Require<int>(doc, "vocab");
  const int horizon = Require<int>(doc, "horizon");
  const double eta = Get<double>(doc, "eta", 1.0);
  const auto seed = Get<std::uint64_t>(doc, "seed", 0);
  const json pi_ref = doc.value("pi_ref", json("uniform"));

  // Reward: explicit per-sequence table, or uniform [0, 1) draws from a seed.
  std::optional<std::vector<double>> rewards;
  std::uint64_t reward_seed = seed;
  if (doc.contains("reward")) {
    const json& r = doc.at("reward");
    if (r.is_array()) {
      rewards = NumberRow(r);
    } else if (r.is_number_unsigned()) {
      reward_seed = r.get<std::uint64_t>();
    } else {
      RejectUnknownKeys(r, {"generator_seed"}, "reward");
      reward_seed = Require<std::uint64_t>(r, "generator_seed");
    }
  }
  if (!rewards) {
    rewards = TokenMdp::Random(vocab, horizon, eta, reward_seed).rewards();
  }

  if (pi_ref.is_string()) {
    const std::string name = pi_ref.get<std::string>();
    if (name == "uniform") {
      return TokenMdp::UniformReference(vocab, horizon, eta, std::move(*rewards));
    }
    if (name == "random") {
      return TokenMdp::Random(vocab, horizon, eta, seed)
          .WithRewards(std::move(*rewards));
    }
    throw InputError("pi_ref must be 'uniform', 'random' or a table");
  }
  // Per-depth tables of probabilities, state-major.
  std::vector<std::vector<double>> log_ref = NumberRows(pi_ref);
  for (auto& level : log_ref) {
    for (double& p : level) {
      if (!(p >= 0.0)) throw InputError("reference probabilities must be >= 0");
      p = std::log(p);
    }
  }
  return TokenMdp(vocab, horizon, eta, std::move(log_ref), std::move(*rewards));
}

Experiment ParseExperiment(const std::string& text,
                           const std::filesystem::path& base_dir) {
  const json doc = ParseJson(text);
  RejectUnknownKeys(
      doc,
      {"game", "K", "selection", "estimation_batch", "generation", "eta",
       "iterations", "optimizer", "seed", "split", "feedback", "method",
       "initial_policy_seed", "evaluation", "eval_draws", "holdout_selection"},
      "experiment config");
  if (!doc.contains("game")) throw InputError("experiment config needs 'game'");
  const json& game = doc.at("game");
  std::optional<PreferenceOracle> oracle;
  if (game.is_string()) {
    oracle = LoadOracleSpec(base_dir / game.get<std::string>());
  } else {
    oracle = OracleFromJson(game);
  }

  RunConfig c;
  c.samples_per_prompt = Get<std::size_t>(doc, "K", c.samples_per_prompt);
  c.selection = ParseEnum(doc, "selection", c.selection,
                          {{"all_k", SelectionStrategy::kAllK},
                           {"best_and_worst", SelectionStrategy::kBestAndWorst}});
  c.estimation_batch = Get<std::size_t>(doc, "estimation_batch", 0);
  c.generation = ParseEnum(doc, "generation", c.generation,
                           {{"sampled", GenerationMode::kSampled},
                            {"exact", GenerationMode::kExact}});
  c.eta = Get<double>(doc, "eta", c.eta);
  c.iterations = Get<int>(doc, "iterations", c.iterations);
  if (doc.contains("optimizer")) c.optimizer = OptimizerFromJson(doc.at("optimizer"));
  c.seed = Get<std::uint64_t>(doc, "seed", c.seed);
  c.split = ParseEnum(doc, "split", c.split,
                      {{"round_robin", SplitPlan::kRoundRobin},
                       {"none", SplitPlan::kNone}});
  c.feedback = ParseEnum(doc, "feedback", c.feedback,
                         {{"probability", FeedbackMode::kProbability},
                          {"bernoulli", FeedbackMode::kBernoulli}});
  if (doc.contains("method")) {
    c.method = ParseTrainingMethod(Get<std::string>(doc, "method", ""));
  }
  if (doc.contains("initial_policy_seed")) {
    c.initial_policy_seed = Get<std::uint64_t>(doc, "initial_policy_seed", 0);
  }
  c.evaluation = ParseEnum(doc, "evaluation", c.evaluation,
                           {{"exact", EvaluationMode::kExact},
                            {"monte_carlo", EvaluationMode::kMonteCarlo}});
  c.eval_draws = Get<std::size_t>(doc, "eval_draws", c.eval_draws);
  c.holdout_selection = Get<bool>(doc, "holdout_selection", false);
  c.Validate(*oracle);
  return {c, *oracle};
}

Experiment LoadExperiment(const std::filesystem::path& path) {
  return ParseExperiment(ReadTextFile(path), path.parent_path());
}

std::string IterationReportsCsv(const std::vector<IterationReport>& reports) {
  std::string out =
      "t,win_rate_vs_previous,win_rate_vs_initial,duality_gap,mixture_gap,"
      "kl_step,dataset_size,fit_steps,fit_grad_norm,fit_converged\n";
  for (const IterationReport& r : reports) {
    out += std::to_string(r.t) + "," + FormatDouble(r.win_rate_vs_previous) +
           "," + FormatDouble(r.win_rate_vs_initial) + "," +
           FormatDouble(r.duality_gap) + "," + FormatDouble(r.mixture_gap) +
           "," + FormatDouble(r.kl_step) + "," + std::to_string(r.dataset_size) +
           "," + std::to_string(r.fit.steps) + "," +
           FormatDouble(r.fit.final_grad_norm) + "," +
           (r.fit.converged ? "true" : "false") + "\n";
  }
  return out;
}

std::string MethodTableCsv(const MethodTable& table) {
  std::string out = "policy";
  for (const std::string& label : table.labels) out += "," + label;
  out += "\n";
  for (std::size_t i = 0; i < table.labels.size(); ++i) {
    out += table.labels[i];
    for (std::size_t j = 0; j < table.labels.size(); ++j) {
      out += "," + FormatDouble(table.win_rates(i, j));
    }
    out += "\n";
  }
  return out;
}

std::string ReadTextFile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

void WriteTextFile(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw ResourceError("cannot create " + path.parent_path().string());
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ResourceError("cannot write " + path.string());
  out << text;
  if (!out) throw ResourceError("write failed for " + path.string());
}

std::string FormatDouble(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value < 0 ? "-inf" : "inf";
  char buffer[32];
  std::snprintf(buffer, sizeof(buffer), "%.17g", value);
  return buffer;
}

}  // namespace sppo
