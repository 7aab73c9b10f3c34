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

#ifndef SPPO_NUMERIC_H_
#define SPPO_NUMERIC_H_

#include <cstddef>
#include <span>
#include <vector>

namespace sppo {

// log(sum(exp(values))). Returns -inf for an empty span or all -inf inputs.
double LogSumExp(std::span<const double> values);

// Logistic function exp(x) / (1 + exp(x)), evaluated without overflow.
double Sigmoid(double x);

// log(1 + exp(x)).
double Softplus(double x);

// Neumaier's variant of Kahan summation.
class CompensatedSum {
 public:
  void Add(double value);
  double value() const { return sum_ + compensation_; }

 private:
  double sum_ = 0.0;
  double compensation_ = 0.0;
};

double Sum(std::span<const double> values);

// 0.5 * sum |p - q|.
double TotalVariation(std::span<const double> p, std::span<const double> q);

double MaxAbsDifference(std::span<const double> p, std::span<const double> q);

// Dense row-major n x n matrix.
class SquareMatrix {
 public:
  SquareMatrix() = default;
  explicit SquareMatrix(std::size_t n, double fill = 0.0)
      : n_(n), data_(n * n, fill) {}

  std::size_t size() const { return n_; }

  double& operator()(std::size_t i, std::size_t j) { return data_[i * n_ + j]; }
  double operator()(std::size_t i, std::size_t j) const {
    return data_[i * n_ + j];
  }

  std::span<const double> row(std::size_t i) const {
    return {data_.data() + i * n_, n_};
  }

  const std::vector<double>& data() const { return data_; }

  friend bool operator==(const SquareMatrix&, const SquareMatrix&) = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

}  // namespace sppo

#endif  // SPPO_NUMERIC_H_
