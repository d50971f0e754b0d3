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
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fusepipe {

enum class Domain { kInstructionFollowing, kMathematics, kCoding, kChinese };
inline constexpr Domain kAllDomains[] = {
    Domain::kInstructionFollowing, Domain::kMathematics, Domain::kCoding,
    Domain::kChinese};

enum class Correctness { kUnknown, kCorrect, kIncorrect };

enum class SelectionReason {
  kHighestRm,
  kCorrectHighestRm,
  kPassAllHighestRm,
  kSingleSourceChinese,
};

std::string_view ToString(Domain d);
std::string_view ToString(Correctness c);
std::string_view ToString(SelectionReason r);
std::optional<Domain> ParseDomain(std::string_view s);
std::optional<Correctness> ParseCorrectness(std::string_view s);
std::optional<SelectionReason> ParseSelectionReason(std::string_view s);

// The selection reason a prompt of domain `d` must carry.
SelectionReason ExpectedSelectionReason(Domain d);

struct TestCase {
  std::string input;
  std::string expected_output;
  int64_t timeout_ms = 1000;

  bool operator==(const TestCase&) const = default;
};

struct Prompt {
  std::string id;
  Domain domain = Domain::kInstructionFollowing;
  std::string text;
  std::optional<std::string> gold_answer;              // Mathematics only
  std::optional<std::vector<TestCase>> test_cases;     // Coding only
  std::string source_dataset;

  bool operator==(const Prompt&) const = default;
};

struct ScoredResponse {
  std::string prompt_id;
  std::string source_model;
  int64_t seed = 0;
  std::string text;
  std::optional<double> rm_score;  // unset until scored
  Correctness correctness = Correctness::kUnknown;
  int64_t token_length = 0;

  bool operator==(const ScoredResponse&) const = default;
};

struct PreferencePair {
  std::string prompt_id;
  std::string source_model;
  ScoredResponse chosen;
  ScoredResponse rejected;
  double gap = 0.0;

  bool operator==(const PreferencePair&) const = default;
};

struct SftExample {
  std::string prompt_id;
  ScoredResponse response;
  SelectionReason selection_reason = SelectionReason::kHighestRm;

  bool operator==(const SftExample&) const = default;
};

// Counts tokens in a response. Lengths only need to be consistent within a
// run, so any deterministic tokenization works.
using TokenCounter = std::function<int64_t(std::string_view)>;

int64_t WhitespaceTokenCount(std::string_view text);

// Invariant checks. Each returns human-readable violations; empty = valid.
std::vector<std::string> Validate(const TestCase& t);
std::vector<std::string> Validate(const Prompt& p);
// `domain` is the owning prompt's domain when known.
std::vector<std::string> Validate(const ScoredResponse& r,
                                  std::optional<Domain> domain = std::nullopt);
std::vector<std::string> Validate(const PreferencePair& p,
                                  std::optional<Domain> domain = std::nullopt);
std::vector<std::string> Validate(const SftExample& e,
                                  std::optional<Domain> domain = std::nullopt);

}  // namespace fusepipe
