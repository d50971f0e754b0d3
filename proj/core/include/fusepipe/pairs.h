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

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fusepipe/types.h"

namespace fusepipe {

struct GapFilter {
  double min_gap = 0.01;
  double max_gap = 0.1;

  bool Accepts(double gap) const { return min_gap <= gap && gap <= max_gap; }
};

std::vector<std::string> Validate(const GapFilter& f);

struct PairOptions {
  GapFilter gap_filter;
  // By default the gap filter applies to InstructionFollowing only.
  bool gap_filter_all_domains = false;
  // Emit every model's candidate instead of the single best one (ablation).
  bool keep_all_model_pairs = false;
};

enum class ExclusionReason { kAllResponsesFailed, kNoResponses, kNoEligibleResponse };
std::string_view ToString(ExclusionReason r);
std::optional<ExclusionReason> ParseExclusionReason(std::string_view s);

struct ExclusionRecord {
  std::string prompt_id;
  Domain domain = Domain::kInstructionFollowing;
  ExclusionReason reason = ExclusionReason::kNoResponses;

  bool operator==(const ExclusionRecord&) const = default;
};

void to_json(nlohmann::json& j, const ExclusionRecord& r);
void from_json(const nlohmann::json& j, ExclusionRecord& r);

// Best response for SFT: global max rm_score (IF, Chinese), restricted to
// Correct responses for Mathematics and Coding. Ties go to the smaller
// (source_model, seed). nullopt when nothing is eligible.
std::optional<SftExample> SelectSftResponse(const Prompt& prompt,
                                            std::span<const ScoredResponse> responses);

// Per model, chosen = highest rm_score and rejected = lowest of the rest; the
// candidate survives only if its gap passes the filter. Returns the surviving
// candidate with the highest chosen score (ties: smaller model id), or every
// survivor when keep_all_model_pairs is set.
std::vector<PreferencePair> BuildIfPair(const Prompt& prompt,
                                        std::span<const ScoredResponse> responses,
                                        const PairOptions& options = {});

// Per model, chosen = highest-rm Correct, rejected = lowest-rm Incorrect.
std::vector<PreferencePair> BuildMathPair(const Prompt& prompt,
                                          std::span<const ScoredResponse> responses,
                                          const PairOptions& options = {});

// Per model, chosen = highest-rm passing, rejected = lowest-rm failing.
// Returns nothing when every response fails; BuildDataset logs that case.
std::vector<PreferencePair> BuildCodePair(const Prompt& prompt,
                                          std::span<const ScoredResponse> responses,
                                          const PairOptions& options = {});

struct DatasetBuild {
  std::vector<SftExample> sft;
  std::vector<PreferencePair> pairs;
  std::vector<ExclusionRecord> exclusions;
};

// Applies the per-domain selection and pairing rules to every prompt of the
// corpus, in corpus order. Chinese prompts only ever produce SFT examples.
// Coding prompts whose responses all fail are excluded from both outputs.
DatasetBuild BuildDataset(std::span<const Prompt> corpus,
                          std::span<const ScoredResponse> pool,
                          const PairOptions& options = {});

}  // namespace fusepipe
