// Copyright 2026 The fusepipe Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <chrono>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fusepipe/types.h"

namespace fusepipe {

enum class ScorerKind { kHttpScorer, kStubScorer };
enum class StubFormula { kLengthLogistic, kHashUniform };

std::string_view ToString(ScorerKind k);
std::string_view ToString(StubFormula f);
std::optional<ScorerKind> ParseScorerKind(std::string_view s);
std::optional<StubFormula> ParseStubFormula(std::string_view s);

struct ScorerBinding {
  ScorerKind kind = ScorerKind::kStubScorer;
  std::optional<std::string> base_url;  // required for kHttpScorer
  StubFormula stub_formula = StubFormula::kHashUniform;
  double logistic_midpoint = 50.0;  // L0
  double logistic_scale = 25.0;     // s
};

std::vector<std::string> Validate(const ScorerBinding& b);

// 64-bit FNV-1a.
uint64_t Fnv1a64(std::string_view bytes);

// (fnv1a64("prompt_id|model_id|seed") mod 10^6) / 10^6.
double HashUniformScore(std::string_view prompt_id, std::string_view model_id,
                        int64_t seed);

// 1 / (1 + exp(-(token_length - midpoint) / scale)).
double LengthLogisticScore(int64_t token_length, double midpoint = 50.0,
                           double scale = 25.0);

struct ScoreFailure {
  std::string prompt_id;
  std::string model_id;
  int64_t seed = 0;
  std::string message;

  bool operator==(const ScoreFailure&) const = default;
};

void to_json(nlohmann::json& j, const ScoreFailure& f);
void from_json(const nlohmann::json& j, ScoreFailure& f);

// Result of asking a reward model for one score.
struct RewardResult {
  std::optional<double> score;
  std::string error;  // set when score is empty
};

class RewardClient {
 public:
  virtual ~RewardClient() = default;
  virtual RewardResult Score(std::string_view prompt,
                             std::string_view response) = 0;
};

// POST {base_url}/score with {prompt, response} -> {score}.
std::unique_ptr<RewardClient> MakeHttpRewardClient(
    std::string base_url, std::chrono::milliseconds timeout = std::chrono::seconds(60));

struct ScoredPool {
  std::vector<ScoredResponse> responses;  // input order, unscorable removed
  std::vector<ScoreFailure> failures;
};

// Looks up the user turn for a prompt id; required by the HTTP scorer.
using PromptTextLookup = std::function<std::optional<std::string>(std::string_view)>;

// Assigns rm_score in [0,1] to every response. Any response that already
// carries a score violates the precondition (std::invalid_argument). Scores
// that are non-numeric, non-finite or outside [0,1] make the item unscorable.
ScoredPool ScorePool(std::span<const ScoredResponse> pool,
                     const ScorerBinding& binding, int parallelism = 1,
                     const PromptTextLookup& prompt_text = {},
                     RewardClient* client = nullptr);

}  // namespace fusepipe
