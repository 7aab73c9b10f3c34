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

#include "sppo/partition_lab.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "sppo/errors.h"
#include "sppo/numeric.h"
#include "sppo/rng.h"

namespace sppo {
namespace {

void CheckEta(double eta) {
  if (!std::isfinite(eta) || eta < 0.0) {
    throw InputError("eta must be finite and >= 0");
  }
}

void CheckK(std::size_t k) {
  if (k < 1) throw InputError("K must be >= 1");
}

// log cosh(x), accurate near zero.
double LogCosh(double x) {
  const double half = std::sinh(x / 2.0);
  return std::log1p(2.0 * half * half);
}

}  // namespace

const char* RegimeName(Regime regime) {
  return regime == Regime::kDisordered ? "disordered" : "ordered";
}

Regime ParseRegime(const std::string& name) {
  if (name == "disordered") return Regime::kDisordered;
  if (name == "ordered") return Regime::kOrdered;
  throw InputError("unknown regime '" + name + "'");
}

DisorderedInstance DisorderedInstance::Sample(std::size_t k, double eta,
                                              std::uint64_t seed) {
  CheckK(k);
  CheckEta(eta);
  const CounterRng rng(seed);
  std::vector<int> signs(k * k, 0);
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j) {
      const int s = rng.Uniform(i, j, 0, 5) < 0.5 ? 1 : -1;
      signs[i * k + j] = s;
      signs[j * k + i] = -s;
    }
  }
  return DisorderedInstance(k, eta, std::move(signs));
}

DisorderedInstance DisorderedInstance::FromSigns(std::size_t k, double eta,
                                                 std::vector<int> signs) {
  CheckK(k);
  CheckEta(eta);
  if (signs.size() != k * k) throw InputError("sign table must be K x K");
  for (std::size_t i = 0; i < k; ++i) {
    if (signs[i * k + i] != 0) throw InputError("sign diagonal must be zero");
    for (std::size_t j = 0; j < k; ++j) {
      const int s = signs[i * k + j];
      if (s < -1 || s > 1) throw InputError("signs must lie in {-1, 0, 1}");
      if (s != -signs[j * k + i]) {
        throw InputError("sign table must be antisymmetric");
      }
    }
  }
  return DisorderedInstance(k, eta, std::move(signs));
}

std::vector<double> DisorderedInstance::RowMeans() const {
  std::vector<double> means(k_);
  for (std::size_t i = 0; i < k_; ++i) {
    long sum = 0;
    for (std::size_t j = 0; j < k_; ++j) sum += sign(i, j);
    means[i] = static_cast<double>(sum) / static_cast<double>(k_);
  }
  return means;
}

double DisorderedPartition(const DisorderedInstance& instance) {
  return std::exp(DisorderedLogPartition(instance));
}

double DisorderedLogPartition(const DisorderedInstance& instance) {
  std::vector<double> terms = instance.RowMeans();
  for (double& t : terms) t *= instance.eta();
  return instance.eta() / 2.0 + LogSumExp(terms) -
         std::log(static_cast<double>(instance.k()));
}

double DisorderedRowSample(std::size_t k, double eta, std::uint64_t seed) {
  CheckK(k);
  CheckEta(eta);
  const CounterRng rng(seed);
  long sum = 0;
  for (std::size_t j = 1; j < k; ++j) sum += rng.Uniform(j, 0, 0, 6) < 0.5 ? 1 : -1;
  return std::exp(eta * static_cast<double>(sum) / static_cast<double>(k));
}

DisorderedMoments ComputeDisorderedMoments(std::size_t k, double eta) {
  CheckK(k);
  CheckEta(eta);
  const double kd = static_cast<double>(k);
  const double lc1 = LogCosh(eta / kd);
  const double lc2 = LogCosh(2.0 * eta / kd);
  DisorderedMoments m;
  m.mean = std::exp((kd - 1.0) * lc1);
  // cosh(2a)^{K-1} - cosh(a)^{2K-2}, factored to avoid cancellation.
  m.variance = std::exp((2.0 * kd - 2.0) * lc1) *
               std::expm1((kd - 1.0) * (lc2 - 2.0 * lc1));
  // cosh(a)^{2K-4} - cosh(a)^{2K-2}; the pair shares one cancelling term.
  m.covariance =
      k < 2 ? 0.0 : -std::exp((2.0 * kd - 4.0) * lc1) * std::expm1(2.0 * lc1);
  return m;
}

OrderedInstance OrderedInstance::Identity(std::size_t k, double eta) {
  CheckK(k);
  std::vector<std::size_t> order(k);
  for (std::size_t i = 0; i < k; ++i) order[i] = i + 1;
  return FromOrder(eta, std::move(order));
}

OrderedInstance OrderedInstance::FromOrder(double eta,
                                           std::vector<std::size_t> order) {
  CheckEta(eta);
  CheckK(order.size());
  std::vector<bool> seen(order.size(), false);
  for (std::size_t r : order) {
    if (r < 1 || r > order.size() || seen[r - 1]) {
      throw InputError("order must be a permutation of 1..K");
    }
    seen[r - 1] = true;
  }
  return OrderedInstance(eta, std::move(order));
}

double OrderedInstance::WinRate(std::size_t i) const {
  if (i >= order_.size()) throw InputError("response index out of range");
  return (static_cast<double>(order_[i]) - 0.5) /
         static_cast<double>(order_.size());
}

double OrderedLogPartition(const OrderedInstance& instance) {
  std::vector<double> terms(instance.k());
  for (std::size_t i = 0; i < terms.size(); ++i) {
    terms[i] = instance.eta() * instance.WinRate(i);
  }
  return LogSumExp(terms) - std::log(static_cast<double>(instance.k()));
}

double OrderedLimit(double eta) {
  CheckEta(eta);
  if (eta == 0.0) return 0.0;
  return eta + std::log(-std::expm1(-eta)) - std::log(eta);
}

double RegimeBaseline(double eta, Regime regime) {
  CheckEta(eta);
  return regime == Regime::kDisordered ? eta / 2.0 : OrderedLimit(eta);
}

std::string PartitionCsv(const std::vector<PartitionRecord>& records) {
  std::string out = "regime,K,eta,seed,statistic,value\n";
  char line[256];
  for (const PartitionRecord& r : records) {
    std::snprintf(line, sizeof(line), "%s,%zu,%.17g,%llu,%s,%.17g\n",
                  RegimeName(r.regime), r.k, r.eta,
                  static_cast<unsigned long long>(r.seed), r.statistic.c_str(),
                  r.value);
    out += line;
  }
  return out;
}

}  // namespace sppo
