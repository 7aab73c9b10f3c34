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

#include "sppo/policy.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "sppo/errors.h"
#include "sppo/numeric.h"
#include "sppo/rng.h"

namespace sppo {
namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

std::string PromptTag(std::size_t x) { return " (prompt " + std::to_string(x) + ")"; }

}  // namespace

ResponseUniverse::ResponseUniverse(std::vector<std::size_t> counts)
    : counts_(std::move(counts)) {
  for (std::size_t x = 0; x < counts_.size(); ++x) {
    if (counts_[x] == 0) {
      throw InputError("response universe needs at least one response" +
                       PromptTag(x));
    }
  }
}

std::size_t ResponseUniverse::num_responses(PromptId x) const {
  if (x.index >= counts_.size()) {
    throw InputError("prompt id out of range" + PromptTag(x.index));
  }
  return counts_[x.index];
}

void ResponseUniverse::set_tokens(
    std::vector<std::vector<std::vector<int>>> tokens) {
  if (tokens.size() != counts_.size()) {
    throw InputError("token table must have one entry per prompt");
  }
  for (std::size_t x = 0; x < tokens.size(); ++x) {
    if (tokens[x].size() != counts_[x]) {
      throw InputError("token table must have one sequence per response" +
                       PromptTag(x));
    }
  }
  tokens_ = std::move(tokens);
}

const std::vector<int>& ResponseUniverse::tokens(PromptId x,
                                                 ResponseId y) const {
  if (tokens_.empty()) throw InputError("response universe has no tokens");
  if (y >= num_responses(x)) throw InputError("response id out of range");
  return tokens_[x.index][y];
}

TabularPolicy TabularPolicy::FromProbabilities(
    const std::vector<std::vector<double>>& rows) {
  std::vector<std::vector<double>> log_rows;
  log_rows.reserve(rows.size());
  for (std::size_t x = 0; x < rows.size(); ++x) {
    const auto& row = rows[x];
    if (row.empty()) throw InputError("empty policy row" + PromptTag(x));
    CompensatedSum total;
    std::vector<double> log_row(row.size());
    for (std::size_t y = 0; y < row.size(); ++y) {
      if (!(row[y] >= 0.0) || !std::isfinite(row[y])) {
        throw InputError("policy probabilities must be finite and >= 0" +
                         PromptTag(x));
      }
      total.Add(row[y]);
      log_row[y] = row[y] > 0.0 ? std::log(row[y]) : kNegInf;
    }
    if (std::abs(total.value() - 1.0) > kRowTolerance) {
      throw InputError("policy row does not sum to 1" + PromptTag(x));
    }
    log_rows.push_back(std::move(log_row));
  }
  return TabularPolicy(std::move(log_rows));
}

TabularPolicy TabularPolicy::FromLogProbabilities(
    std::vector<std::vector<double>> log_rows) {
  for (std::size_t x = 0; x < log_rows.size(); ++x) {
    const auto& row = log_rows[x];
    if (row.empty()) throw InputError("empty policy row" + PromptTag(x));
    for (double v : row) {
      if (std::isnan(v) || v == std::numeric_limits<double>::infinity()) {
        throw InputError("log-probabilities must be < +inf" + PromptTag(x));
      }
    }
    if (std::abs(std::expm1(LogSumExp(row))) > kRowTolerance) {
      throw InputError("policy row does not sum to 1" + PromptTag(x));
    }
  }
  return TabularPolicy(std::move(log_rows));
}

TabularPolicy TabularPolicy::FromLogWeights(
    std::vector<std::vector<double>> weights) {
  for (std::size_t x = 0; x < weights.size(); ++x) {
    auto& row = weights[x];
    if (row.empty()) throw InputError("empty policy row" + PromptTag(x));
    const double norm = LogSumExp(row);
    if (!std::isfinite(norm)) {
      throw InputError("log-weights have no finite mass" + PromptTag(x));
    }
    for (double& v : row) v -= norm;
  }
  return TabularPolicy(std::move(weights));
}

TabularPolicy TabularPolicy::Uniform(const ResponseUniverse& universe) {
  std::vector<std::vector<double>> rows;
  for (std::size_t n : universe.counts()) {
    rows.emplace_back(n, -std::log(static_cast<double>(n)));
  }
  return TabularPolicy(std::move(rows));
}

TabularPolicy TabularPolicy::PointMass(const ResponseUniverse& universe,
                                       const std::vector<ResponseId>& choice) {
  if (choice.size() != universe.num_prompts()) {
    throw InputError("point mass needs one response per prompt");
  }
  std::vector<std::vector<double>> rows;
  for (std::size_t x = 0; x < choice.size(); ++x) {
    const std::size_t n = universe.counts()[x];
    if (choice[x] >= n) throw InputError("response id out of range");
    std::vector<double> row(n, kNegInf);
    row[choice[x]] = 0.0;
    rows.push_back(std::move(row));
  }
  return TabularPolicy(std::move(rows));
}

std::size_t TabularPolicy::num_responses(PromptId x) const {
  return LogRow(x).size();
}

ResponseUniverse TabularPolicy::universe() const {
  std::vector<std::size_t> counts;
  for (const auto& row : log_rows_) counts.push_back(row.size());
  return ResponseUniverse(std::move(counts));
}

double TabularPolicy::Prob(PromptId x, ResponseId y) const {
  return std::exp(LogProb(x, y));
}

double TabularPolicy::LogProb(PromptId x, ResponseId y) const {
  const auto row = LogRow(x);
  if (y >= row.size()) throw InputError("response id out of range");
  return row[y];
}

std::span<const double> TabularPolicy::LogRow(PromptId x) const {
  if (x.index >= log_rows_.size()) {
    throw InputError("prompt id out of range" + PromptTag(x.index));
  }
  return log_rows_[x.index];
}

std::vector<double> TabularPolicy::Row(PromptId x) const {
  const auto log_row = LogRow(x);
  std::vector<double> row(log_row.size());
  std::transform(log_row.begin(), log_row.end(), row.begin(),
                 [](double v) { return std::exp(v); });
  return row;
}

bool TabularPolicy::SameShape(const TabularPolicy& other) const {
  if (log_rows_.size() != other.log_rows_.size()) return false;
  for (std::size_t x = 0; x < log_rows_.size(); ++x) {
    if (log_rows_[x].size() != other.log_rows_[x].size()) return false;
  }
  return true;
}

bool TabularPolicy::FullySupported() const {
  for (const auto& row : log_rows_) {
    for (double v : row) {
      if (!std::isfinite(v)) return false;
    }
  }
  return true;
}

SoftmaxPolicy::SoftmaxPolicy(const std::vector<std::vector<double>>& logits) {
  for (std::size_t x = 0; x < logits.size(); ++x) {
    if (logits[x].empty()) throw InputError("empty logit row" + PromptTag(x));
    for (double v : logits[x]) {
      if (!std::isfinite(v)) {
        throw InputError("logits must be finite" + PromptTag(x));
      }
      params_.push_back(v);
    }
    offsets_.push_back(params_.size());
  }
}

SoftmaxPolicy SoftmaxPolicy::FromPolicy(const TabularPolicy& pi) {
  return SoftmaxPolicy(pi.log_rows());
}

SoftmaxPolicy SoftmaxPolicy::WithParams(const SoftmaxPolicy& like,
                                        std::vector<double> params) {
  if (params.size() != like.params_.size()) {
    throw InputError("parameter vector has the wrong size");
  }
  for (double v : params) {
    if (!std::isfinite(v)) throw InputError("logits must be finite");
  }
  SoftmaxPolicy result = like;
  result.params_ = std::move(params);
  return result;
}

std::size_t SoftmaxPolicy::num_responses(PromptId x) const {
  return Logits(x).size();
}

std::span<const double> SoftmaxPolicy::Logits(PromptId x) const {
  if (x.index + 1 >= offsets_.size()) {
    throw InputError("prompt id out of range" + PromptTag(x.index));
  }
  return std::span<const double>(params_).subspan(
      offsets_[x.index], offsets_[x.index + 1] - offsets_[x.index]);
}

std::vector<double> SoftmaxPolicy::LogProbs(PromptId x) const {
  const auto logits = Logits(x);
  const double max = *std::max_element(logits.begin(), logits.end());
  std::vector<double> shifted(logits.size());
  for (std::size_t y = 0; y < logits.size(); ++y) shifted[y] = logits[y] - max;
  const double norm = LogSumExp(shifted);
  for (double& v : shifted) v -= norm;
  return shifted;
}

TabularPolicy SoftmaxPolicy::Realize() const {
  std::vector<std::vector<double>> rows;
  rows.reserve(num_prompts());
  for (std::size_t x = 0; x < num_prompts(); ++x) {
    rows.push_back(LogProbs(PromptId(x)));
  }
  return TabularPolicy::FromLogWeights(std::move(rows));
}

TabularPolicy SoftmaxRealize(const SoftmaxPolicy& policy) {
  return policy.Realize();
}

MixturePolicy::MixturePolicy(std::vector<TabularPolicy> members)
    : members_(std::move(members)) {
  if (members_.empty()) throw InputError("mixture needs at least one member");
  for (const auto& m : members_) {
    if (!m.SameShape(members_.front())) {
      throw InputError("mixture members must share a response universe");
    }
  }
}

double MixturePolicy::Eval(PromptId x, ResponseId y) const {
  CompensatedSum sum;
  for (const auto& m : members_) sum.Add(m.Prob(x, y));
  return sum.value() / static_cast<double>(members_.size());
}

TabularPolicy MixturePolicy::Materialize() const {
  const double log_t = std::log(static_cast<double>(members_.size()));
  std::vector<std::vector<double>> rows;
  std::vector<double> terms(members_.size());
  for (std::size_t x = 0; x < members_.front().num_prompts(); ++x) {
    const std::size_t n = members_.front().num_responses(PromptId(x));
    std::vector<double> row(n);
    for (std::size_t y = 0; y < n; ++y) {
      for (std::size_t t = 0; t < members_.size(); ++t) {
        terms[t] = members_[t].log_rows()[x][y];
      }
      row[y] = LogSumExp(terms) - log_t;
    }
    rows.push_back(std::move(row));
  }
  return TabularPolicy::FromLogWeights(std::move(rows));
}

double KlDivergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw InputError("KL: size mismatch");
  CompensatedSum kl;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] <= 0.0) continue;
    if (q[i] <= 0.0) {
      throw DomainError("KL divergence is infinite: p has mass outside the "
                        "support of q");
    }
    kl.Add(p[i] * (std::log(p[i]) - std::log(q[i])));
  }
  return std::max(0.0, kl.value());
}

double KlDivergenceLog(std::span<const double> log_p,
                       std::span<const double> log_q) {
  if (log_p.size() != log_q.size()) throw InputError("KL: size mismatch");
  CompensatedSum kl;
  for (std::size_t i = 0; i < log_p.size(); ++i) {
    if (log_p[i] == kNegInf) continue;
    if (log_q[i] == kNegInf) {
      throw DomainError("KL divergence is infinite: p has mass outside the "
                        "support of q");
    }
    kl.Add(std::exp(log_p[i]) * (log_p[i] - log_q[i]));
  }
  return std::max(0.0, kl.value());
}

std::vector<ResponseId> SampleResponses(const TabularPolicy& pi, PromptId x,
                                        std::size_t k, const SampleKey& key) {
  if (k == 0) throw InputError("SampleResponses: k must be >= 1");
  const std::vector<double> row = pi.Row(x);
  std::vector<double> cdf(row.size());
  double running = 0.0;
  std::size_t last_supported = 0;
  for (std::size_t y = 0; y < row.size(); ++y) {
    running += row[y];
    cdf[y] = running;
    if (row[y] > 0.0) last_supported = y;
  }
  const CounterRng rng(key.seed);
  std::vector<ResponseId> draws(k);
  for (std::size_t d = 0; d < k; ++d) {
    const double u = rng.Uniform(key.iteration, x.index, d) * running;
    const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
    draws[d] = std::min<std::size_t>(it - cdf.begin(), last_supported);
  }
  return draws;
}

}  // namespace sppo
