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
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "fusepipe/types.h"

namespace fusepipe {

// ---------------------------------------------------------------------------
// Mathematics

// Final answer in a response: the last balanced \boxed{...}, else the text
// after the last "####" (to end of line), else nullopt. The result is
// canonicalized.
std::optional<std::string> ExtractFinalAnswer(std::string_view text);

// Trim, drop '$', '%' and ',', collapse internal whitespace runs to one space.
std::string CanonicalizeAnswer(std::string_view answer);

// Parses an integer, decimal or "a/b" rational. Input is expected to be
// canonicalized.
std::optional<double> ParseRational(std::string_view s);

// Correct iff an answer is extracted and it matches `gold`: numerically with
// 1e-9 relative tolerance when both sides are rationals, otherwise as exact
// strings after canonicalization.
Correctness CheckMath(std::string_view response_text, std::string_view gold);

bool AnswersEquivalent(std::string_view a, std::string_view b);

// ---------------------------------------------------------------------------
// Coding

enum class TestOutcome { kPass, kFail, kTimeout, kCrash };
std::string_view ToString(TestOutcome t);

struct CodeVerdict {
  bool static_ok = false;
  std::vector<TestOutcome> per_test;  // empty when static_ok is false
  bool pass_all = false;
};

// How programs are executed. Templates are run through /bin/sh; {src} is
// replaced by the quoted program path and {stdin_file} by the quoted test
// input path. Without {stdin_file}, the input is redirected to stdin.
struct ExecutorBinding {
  std::string command_template;
  // Optional compile/parse step; the program is statically OK only if this
  // exits 0. Same placeholders as command_template.
  std::optional<std::string> check_template;
  std::filesystem::path workdir;
  int64_t sandbox_timeout_ms = 10000;
  std::string source_filename = "main.src";
};

std::vector<std::string> Validate(const ExecutorBinding& b);

// Last fenced ``` block of a response. Without a fence, the whole response is
// taken as the program only if the binding's check step accepts it.
// Returns an empty string when no program is found.
std::string ExtractProgram(std::string_view response, const ExecutorBinding& executor);
std::optional<std::string> LastFencedBlock(std::string_view response);

// Strips trailing whitespace on each line and trailing blank lines.
std::string NormalizeOutput(std::string_view s);

// Runs every test against `code` (an already extracted program). Throws
// ExecutorError when the executor binary is missing.
CodeVerdict RunCodeTests(std::string_view code, std::span<const TestCase> tests,
                         const ExecutorBinding& executor);

// Sets correctness on every response: Mathematics by CheckMath against the
// prompt's gold answer, Coding by pass_all of the extracted program. Other
// domains stay Unknown. Responses for unknown prompt ids are left untouched.
std::vector<ScoredResponse> AnnotateCorrectness(std::span<const ScoredResponse> pool,
                                                std::span<const Prompt> corpus,
                                                const ExecutorBinding& executor,
                                                int parallelism = 1);

}  // namespace fusepipe
