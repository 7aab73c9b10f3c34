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

// File formats: oracle specifications, policy snapshots, token-MDP
// specifications, run configurations, and tabular result exports. All
// structured documents are JSON.

#ifndef SPPO_IO_H_
#define SPPO_IO_H_

#include <filesystem>
#include <string>
#include <vector>

#include "sppo/exact_solver.h"
#include "sppo/policy.h"
#include "sppo/preference.h"
#include "sppo/selfplay.h"
#include "sppo/token_mdp.h"

namespace sppo {

// { "prompts": N, "responses_per_prompt": [n_1..n_N],
//   "oracle": {"kind": "matrix"|"bradley_terry"|"relative_reward",
//              "data": ...},
//   "prompt_weights": [...] (optional), "tokens": [...] (optional) }
//
// Matrix and relative-reward data are per-prompt row-major n x n nested
// arrays with both triangles present; Bradley-Terry data is one reward row per
// prompt.
PreferenceOracle ParseOracleSpec(const std::string& text);
PreferenceOracle LoadOracleSpec(const std::filesystem::path& path);
std::string SerializeOracleSpec(const PreferenceOracle& oracle);

// { "log_probs": [[...], ...] } with 17 significant digits; -inf is written as
// the string "-inf". Reading back reproduces the policy bit for bit.
std::string SerializePolicySnapshot(const TabularPolicy& policy);
TabularPolicy ParsePolicySnapshot(const std::string& text);

// { "vocab": V, "horizon": H, "eta": eta,
//   "pi_ref": "uniform" | [[row], ...] (states in depth then index order),
//   "reward": [V^H values] | {"generator_seed": s} }
TokenMdp ParseTokenMdpSpec(const std::string& text);

// Run configuration; "game" is either an inline oracle spec or a path
// resolved relative to `base_dir`.
struct Experiment {
  RunConfig config;
  PreferenceOracle oracle;
};
Experiment ParseExperiment(const std::string& text,
                           const std::filesystem::path& base_dir);
Experiment LoadExperiment(const std::filesystem::path& path);

std::string IterationReportsCsv(const std::vector<IterationReport>& reports);
std::string MethodTableCsv(const MethodTable& table);

std::string ReadTextFile(const std::filesystem::path& path);
void WriteTextFile(const std::filesystem::path& path, const std::string& text);

// printf("%.17g").
std::string FormatDouble(double value);

}  // namespace sppo

#endif  // SPPO_IO_H_
