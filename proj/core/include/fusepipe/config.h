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

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "fusepipe/pairs.h"
#include "fusepipe/sampling.h"
#include "fusepipe/scoring.h"
#include "fusepipe/split.h"
#include "fusepipe/trainer.h"
#include "fusepipe/verification.h"

namespace fusepipe {

// Base URL value that binds an endpoint or scorer to the in-process mock
// server when `mock_server` is enabled.
inline constexpr std::string_view kMockUrl = "mock";

struct PipelineConfig {
  std::filesystem::path corpus;
  std::filesystem::path workdir;
  int parallelism = 1;
  bool mock_server = false;

  std::vector<ModelEndpoint> endpoints;
  ProfileOverrides profile_overrides;
  SamplingOptions sampling;

  ScorerBinding scorer;
  ExecutorBinding executor;
  PairOptions pairs;
  SplitConfig split;

  std::size_t vocab_size = ToyPolicy::kMaxVocab;
  TrainConfig train_sft = TrainConfig::Defaults(TrainStage::kSft);
  TrainConfig train_dpo = TrainConfig::Defaults(TrainStage::kDpo);
};

using EnvLookup = std::function<std::optional<std::string>(std::string_view)>;

// Reads the process environment.
std::optional<std::string> GetEnv(std::string_view name);

// Replaces ${NAME} and ${NAME:-default} references. Throws ConfigError for an
// unset variable without a default.
std::string InterpolateEnv(std::string_view text, const EnvLookup& env = GetEnv);

// Parses YAML config text. Relative paths resolve against `base_dir`.
// Throws ConfigError on invalid content.
PipelineConfig ParseConfig(std::string_view yaml_text, const std::filesystem::path& base_dir,
                           const EnvLookup& env = GetEnv);

PipelineConfig LoadConfig(const std::filesystem::path& path, const EnvLookup& env = GetEnv);

// Cross-field checks; returns violations.
std::vector<std::string> Validate(const PipelineConfig& config);

}  // namespace fusepipe
