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
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fusepipe/types.h"

namespace fusepipe {

struct SplitConfig {
  double if_sft_fraction = 0.4;
  uint64_t seed = 0;
  // When false, Mathematics and Coding prompts are split by the same seeded
  // ratio rule as InstructionFollowing instead of by pair availability.
  bool math_dpo_requires_pair = true;
};

std::vector<std::string> Validate(const SplitConfig& c);

// One SFT training record, carrying what training and reporting need.
struct SftRecord {
  std::string prompt_id;
  Domain domain = Domain::kInstructionFollowing;
  std::string source_dataset;
  std::string prompt_text;
  ScoredResponse response;
  SelectionReason selection_reason = SelectionReason::kHighestRm;

  bool operator==(const SftRecord&) const = default;
};

struct DpoRecord {
  std::string prompt_id;
  Domain domain = Domain::kInstructionFollowing;
  std::string source_dataset;
  std::string prompt_text;
  PreferencePair pair;

  bool operator==(const DpoRecord&) const = default;
};

void to_json(nlohmann::json& j, const SftRecord& r);
void from_json(const nlohmann::json& j, SftRecord& r);
void to_json(nlohmann::json& j, const DpoRecord& r);
void from_json(const nlohmann::json& j, DpoRecord& r);

struct SplitResult {
  std::vector<SftRecord> sft;
  std::vector<DpoRecord> dpo;
};

// Fisher-Yates permutation of [0, n) driven by mt19937_64(seed).
std::vector<std::size_t> SeededPermutation(std::size_t n, uint64_t seed);

// ceil(fraction * n), robust to the rounding error in fraction * n.
std::size_t SftQuota(double fraction, std::size_t n);

// Assigns each prompt to exactly one phase. InstructionFollowing prompts are
// permuted and the first SftQuota() go to SFT, the rest to DPO (falling back
// to SFT without a pair). Mathematics/Coding go to DPO iff they have a pair.
// Chinese prompts always go to SFT. Output follows corpus order.
SplitResult Partition(std::span<const Prompt> corpus,
                      std::span<const SftExample> sft_examples,
                      std::span<const PreferencePair> pairs,
                      const SplitConfig& config = {});

struct ReportRow {
  Domain domain = Domain::kInstructionFollowing;
  std::string source_dataset;
  int64_t count = 0;
  int64_t sft = 0;
  int64_t dpo = 0;

  bool operator==(const ReportRow&) const = default;
};

struct CompositionReport {
  std::vector<ReportRow> rows;  // ordered by (domain, source_dataset)
  int64_t total_count = 0;
  int64_t total_sft = 0;
  int64_t total_dpo = 0;
};

CompositionReport ComposeReport(std::span<const SftRecord> sft,
                                std::span<const DpoRecord> dpo);

// Builds a report from precomputed rows (totals are recomputed).
CompositionReport ReportFromRows(std::vector<ReportRow> rows);

// Rows where count != sft + dpo, plus "total" if the totals do not add up.
std::vector<std::string> CheckConservation(const CompositionReport& report);

std::string RenderReportText(const CompositionReport& report);
nlohmann::json ReportToJson(const CompositionReport& report);

}  // namespace fusepipe
