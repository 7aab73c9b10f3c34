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

#ifndef SPPO_DATASET_H_
#define SPPO_DATASET_H_

#include <cstddef>
#include <vector>

#include "sppo/preference.h"
#include "sppo/types.h"

namespace sppo {

enum class SelectionStrategy {
  // Keep all K sampled responses.
  kAllK,
  // Keep the highest- and lowest-scoring response of each batch.
  kBestAndWorst,
};

const char* SelectionStrategyName(SelectionStrategy strategy);

// One regression example (x, y, P_hat(y > pi_t | x)). `weight` is 1 for
// sampled entries; datasets built from exact expectations weight each
// response by pi_t(y|x) times the prompt weight.
struct DatasetEntry {
  PromptId prompt;
  ResponseId response = 0;
  WinRateEstimate estimate;
  double weight = 1.0;
};

// (x, y_w, y_l, P(y_w > y_l | x)).
struct PreferenceTriplet {
  PromptId prompt;
  ResponseId winner = 0;
  ResponseId loser = 0;
  double p_win = 1.0;
};

PreferenceTriplet MakeTriplet(PromptId x, ResponseId winner, ResponseId loser,
                              double p_win);

struct PreferenceDataset {
  std::vector<DatasetEntry> entries;
  std::vector<PreferenceTriplet> triplets;
  // Sampled batch y_1..y_K per prompt; empty for prompts not in this split.
  std::vector<std::vector<ResponseId>> batches;
  int iteration = 0;
  SelectionStrategy strategy = SelectionStrategy::kAllK;
  // True when entries carry exact win rates against pi_t over the whole
  // universe instead of finite-sample estimates.
  bool exact = false;

  void Append(const PreferenceDataset& other);
};

}  // namespace sppo

#endif  // SPPO_DATASET_H_
