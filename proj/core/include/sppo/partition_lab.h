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

// Normalising factor of the exponential update in the two extreme preference
// regimes: coin-flip ("disordered") preferences, where log Z tends to eta/2,
// and a strict total order, where log Z tends to log((e^eta - 1) / eta).

#ifndef SPPO_PARTITION_LAB_H_
#define SPPO_PARTITION_LAB_H_

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

namespace sppo {

enum class Regime { kDisordered, kOrdered };

const char* RegimeName(Regime regime);
Regime ParseRegime(const std::string& name);

// K responses with p_{i,j} = 2 P(y_i > y_j) - 1 in {-1, 0, +1},
// antisymmetric, zero diagonal.
class DisorderedInstance {
 public:
  // Draws the K(K-1)/2 upper-triangle Rademacher variables and mirrors them.
  static DisorderedInstance Sample(std::size_t k, double eta, std::uint64_t seed);
  // Explicit signs, row-major K x K; validated.
  static DisorderedInstance FromSigns(std::size_t k, double eta,
                                      std::vector<int> signs);

  std::size_t k() const { return k_; }
  double eta() const { return eta_; }
  int sign(std::size_t i, std::size_t j) const { return signs_[i * k_ + j]; }

  // X_i = sum_j p_{i,j} / K.
  std::vector<double> RowMeans() const;

 private:
  DisorderedInstance(std::size_t k, double eta, std::vector<int> signs)
      : k_(k), eta_(eta), signs_(std::move(signs)) {}

  std::size_t k_;
  double eta_;
  std::vector<int> signs_;
};

// Z = e^{eta/2} (1/K) sum_i e^{eta X_i}.
double DisorderedPartition(const DisorderedInstance& instance);
// log Z = eta/2 + log mean exp(eta X_i); safe for large eta.
double DisorderedLogPartition(const DisorderedInstance& instance);

// e^{eta X_i} for one row i, sampling only the K-1 variables p_{i,j}. Same
// marginal law as a row of a full instance.
double DisorderedRowSample(std::size_t k, double eta, std::uint64_t seed);

struct DisorderedMoments {
  double mean = 1.0;
  double variance = 0.0;
  double covariance = 0.0;
};

// Closed-form mean and variance of e^{eta X_i} and covariance of e^{eta X_i},
// e^{eta X_j} for i != j.
DisorderedMoments ComputeDisorderedMoments(std::size_t k, double eta);

// Strict ordering sigma over K responses: the response with rank r (1 = worst)
// has win rate (r - 1/2) / K against the batch.
class OrderedInstance {
 public:
  static OrderedInstance Identity(std::size_t k, double eta);
  // `order[i]` is the rank (1-based) of response i; must be a permutation.
  static OrderedInstance FromOrder(double eta, std::vector<std::size_t> order);

  std::size_t k() const { return order_.size(); }
  double eta() const { return eta_; }
  const std::vector<std::size_t>& order() const { return order_; }

  // P(y_i > pi_hat^K | x).
  double WinRate(std::size_t i) const;

 private:
  OrderedInstance(double eta, std::vector<std::size_t> order)
      : eta_(eta), order_(std::move(order)) {}

  double eta_;
  std::vector<std::size_t> order_;
};

// log((1/K) sum_i exp(eta (i - 1/2) / K)).
double OrderedLogPartition(const OrderedInstance& instance);

// log((e^eta - 1) / eta), the K -> infinity limit; 0 at eta = 0.
double OrderedLimit(double eta);

// eta/2 for the disordered regime, OrderedLimit(eta) for the ordered one.
double RegimeBaseline(double eta, Regime regime);

struct PartitionRecord {
  Regime regime = Regime::kDisordered;
  std::size_t k = 0;
  double eta = 0.0;
  std::uint64_t seed = 0;
  std::string statistic;
  double value = 0.0;
};

// Header regime,K,eta,seed,statistic,value.
std::string PartitionCsv(const std::vector<PartitionRecord>& records);

}  // namespace sppo

#endif  // SPPO_PARTITION_LAB_H_
