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

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>

#include "fusepipe/config.h"
#include "fusepipe/sampling.h"
#include "fusepipe/scoring.h"

namespace fusepipe {

enum class Stage {
  kSample,
  kScore,
  kVerify,
  kPair,
  kSplit,
  kReport,
  kTrainSft,
  kTrainDpo,
  kLossesCheck,
};

inline constexpr Stage kPipelineOrder[] = {
    Stage::kSample, Stage::kScore,    Stage::kVerify,   Stage::kPair,
    Stage::kSplit,  Stage::kReport,   Stage::kTrainSft, Stage::kTrainDpo,
};

std::string_view ToString(Stage s);
std::optional<Stage> ParseStage(std::string_view s);

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitMissingPrerequisite = 2;
inline constexpr int kExitConfigError = 3;
inline constexpr int kExitNumericFailure = 4;

// Artifact file names inside the workdir.
namespace artifacts {
inline constexpr std::string_view kPool = "pool.jsonl";
inline constexpr std::string_view kSampleFailures = "sample_failures.jsonl";
inline constexpr std::string_view kScored = "scored.jsonl";
inline constexpr std::string_view kScoreFailures = "score_failures.jsonl";
inline constexpr std::string_view kVerified = "verified.jsonl";
inline constexpr std::string_view kSft = "sft.jsonl";
inline constexpr std::string_view kDpo = "dpo.jsonl";
inline constexpr std::string_view kExclusions = "exclusions.jsonl";
inline constexpr std::string_view kSftFinal = "sft_final.jsonl";
inline constexpr std::string_view kDpoFinal = "dpo_final.jsonl";
inline constexpr std::string_view kReportTxt = "report.txt";
inline constexpr std::string_view kReportJson = "report.json";
inline constexpr std::string_view kSftCheckpoint = "sft_policy.json";
inline constexpr std::string_view kSftCurve = "sft_curve.csv";
inline constexpr std::string_view kDpoCheckpoint = "dpo_policy.json";
inline constexpr std::string_view kDpoCurve = "dpo_curve.csv";
inline constexpr std::string_view kDpoSummary = "dpo_summary.json";
inline constexpr std::string_view kCheckpointDir = "checkpoints";
inline constexpr std::string_view kManifest = "manifest.json";
inline constexpr std::string_view kLock = ".fusepipe.lock";
}  // namespace artifacts

struct RunOptions {
  // Skip a stage whose recorded input hash matches and whose outputs exist.
  bool resume = false;
  std::ostream* log = nullptr;  // defaults to std::cerr
  std::ostream* out = nullptr;  // stage reports; defaults to std::cout
  // Transport overrides for tests; HTTP clients are used when null.
  ChatClient* chat_client = nullptr;
  RewardClient* reward_client = nullptr;
};

// Runs one stage and returns the process exit code: 0 ok, 1 hard error,
// 2 missing prerequisite, 3 config error, 4 numeric failure. Holds an
// exclusive lock on the workdir while running.
int RunStage(Stage stage, const PipelineConfig& config, const RunOptions& options = {});

// Runs every stage of kPipelineOrder, stopping at the first failure.
int RunAll(const PipelineConfig& config, const RunOptions& options = {});

}  // namespace fusepipe
