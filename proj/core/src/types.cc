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

#include "fusepipe/types.h"

#include <cmath>
#include <string>

namespace fusepipe {

std::string_view ToString(Domain d) {
  switch (d) {
    case Domain::kInstructionFollowing: return "InstructionFollowing";
    case Domain::kMathematics: return "Mathematics";
    case Domain::kCoding: return "Coding";
    case Domain::kChinese: return "Chinese";
  }
  return "?";
}

std::string_view ToString(Correctness c) {
  switch (c) {
    case Correctness::kUnknown: return "Unknown";
    case Correctness::kCorrect: return "Correct";
    case Correctness::kIncorrect: return "Incorrect";
  }
  return "?";
}

std::string_view ToString(SelectionReason r) {
  switch (r) {
    case SelectionReason::kHighestRm: return "HighestRm";
    case SelectionReason::kCorrectHighestRm: return "CorrectHighestRm";
    case SelectionReason::kPassAllHighestRm: return "PassAllHighestRm";
    case SelectionReason::kSingleSourceChinese: return "SingleSourceChinese";
  }
  return "?";
}

std::optional<Domain> ParseDomain(std::string_view s) {
  for (Domain d : kAllDomains) {
    if (ToString(d) == s) return d;
  }
  return std::nullopt;
}

std::optional<Correctness> ParseCorrectness(std::string_view s) {
  for (Correctness c : {Correctness::kUnknown, Correctness::kCorrect, Correctness::kIncorrect}) {
    if (ToString(c) == s) return c;
  }
  return std::nullopt;
}

std::optional<SelectionReason> ParseSelectionReason(std::string_view s) {
  for (SelectionReason r :
       {SelectionReason::kHighestRm, SelectionReason::kCorrectHighestRm,
        SelectionReason::kPassAllHighestRm, SelectionReason::kSingleSourceChinese}) {
    if (ToString(r) == s) return r;
  }
  return std::nullopt;
}

SelectionReason ExpectedSelectionReason(Domain d) {
  switch (d) {
    case Domain::kInstructionFollowing: return SelectionReason::kHighestRm;
    case Domain::kMathematics: return SelectionReason::kCorrectHighestRm;
    case Domain::kCoding: return SelectionReason::kPassAllHighestRm;
    case Domain::kChinese: return SelectionReason::kSingleSourceChinese;
  }
  return SelectionReason::kHighestRm;
}

int64_t WhitespaceTokenCount(std::string_view text) {
  int64_t n = 0;
  bool in_word = false;
  for (char c : text) {
    const bool space = c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\v' || c == '\f';
    if (!space && !in_word) ++n;
    in_word = !space;
  }
  return n;
}

std::vector<std::string> Validate(const TestCase& t) {
  std::vector<std::string> out;
  if (t.timeout_ms <= 0) out.push_back("timeout_ms must be positive");
  return out;
}

std::vector<std::string> Validate(const Prompt& p) {
  std::vector<std::string> out;
  if (p.id.empty()) out.push_back("empty id");
  const bool has_gold = p.gold_answer.has_value();
  const bool has_tests = p.test_cases.has_value();
  switch (p.domain) {
    case Domain::kMathematics:
      if (!has_gold) out.push_back("Mathematics prompt without gold_answer");
      else if (p.gold_answer->empty()) out.push_back("empty gold_answer");
      if (has_tests) out.push_back("test_cases on a non-Coding prompt");
      break;
    case Domain::kCoding:
      if (!has_tests || p.test_cases->empty()) out.push_back("empty test_cases");
      if (has_gold) out.push_back("gold_answer on a non-Mathematics prompt");
      break;
    default:
      if (has_gold) out.push_back("gold_answer on a non-Mathematics prompt");
      if (has_tests) out.push_back("test_cases on a non-Coding prompt");
      break;
  }
  if (has_tests) {
    for (std::size_t i = 0; i < p.test_cases->size(); ++i) {
      for (auto& v : Validate((*p.test_cases)[i])) {
        out.push_back("test_cases[" + std::to_string(i) + "]: " + v);
      }
    }
  }
  return out;
}

std::vector<std::string> Validate(const ScoredResponse& r, std::optional<Domain> domain) {
  std::vector<std::string> out;
  if (r.prompt_id.empty()) out.push_back("empty prompt_id");
  if (r.source_model.empty()) out.push_back("empty source_model");
  if (r.token_length < 0) out.push_back("negative token_length");
  if (r.rm_score) {
    if (!std::isfinite(*r.rm_score) || *r.rm_score < 0.0 || *r.rm_score > 1.0) {
      out.push_back("rm_score outside [0,1]");
    }
  }
  if (domain) {
    const bool unknown_domain =
        *domain == Domain::kInstructionFollowing || *domain == Domain::kChinese;
    const bool unknown = r.correctness == Correctness::kUnknown;
    if (unknown_domain && !unknown) {
      out.push_back("correctness set for a " + std::string(ToString(*domain)) + " response");
    }
    if (!unknown_domain && unknown) {
      out.push_back("correctness Unknown for a " + std::string(ToString(*domain)) + " response");
    }
  }
  return out;
}

std::vector<std::string> Validate(const PreferencePair& p, std::optional<Domain> domain) {
  std::vector<std::string> out;
  for (auto& v : Validate(p.chosen, domain)) out.push_back("chosen: " + v);
  for (auto& v : Validate(p.rejected, domain)) out.push_back("rejected: " + v);
  if (p.chosen.source_model != p.source_model || p.rejected.source_model != p.source_model) {
    out.push_back("pair is not intra-model");
  }
  if (p.chosen.prompt_id != p.prompt_id || p.rejected.prompt_id != p.prompt_id) {
    out.push_back("response prompt_id differs from pair prompt_id");
  }
  if (!p.chosen.rm_score || !p.rejected.rm_score) {
    out.push_back("unscored response in pair");
  } else {
    const double diff = *p.chosen.rm_score - *p.rejected.rm_score;
    if (*p.chosen.rm_score < *p.rejected.rm_score) out.push_back("chosen scores below rejected");
    if (std::abs(p.gap - diff) > 1e-12) out.push_back("gap does not match score difference");
  }
  if (domain == Domain::kMathematics || domain == Domain::kCoding) {
    if (p.chosen.correctness != Correctness::kCorrect) out.push_back("chosen is not Correct");
    if (p.rejected.correctness != Correctness::kIncorrect) out.push_back("rejected is not Incorrect");
  }
  if (domain == Domain::kChinese) out.push_back("Chinese prompts never produce pairs");
  return out;
}

std::vector<std::string> Validate(const SftExample& e, std::optional<Domain> domain) {
  std::vector<std::string> out;
  for (auto& v : Validate(e.response, domain)) out.push_back("response: " + v);
  if (e.response.prompt_id != e.prompt_id) out.push_back("response prompt_id differs");
  if (domain) {
    if (e.selection_reason != ExpectedSelectionReason(*domain)) {
      out.push_back("selection_reason inconsistent with domain");
    }
    if ((*domain == Domain::kMathematics || *domain == Domain::kCoding) &&
        e.response.correctness != Correctness::kCorrect) {
      out.push_back("SFT response is not Correct");
    }
  }
  return out;
}

}  // namespace fusepipe
