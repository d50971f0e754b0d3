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

#include "fusepipe/pairs.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <tuple>
#include <unordered_map>

namespace fusepipe {

std::vector<std::string> Validate(const GapFilter& f) {
  std::vector<std::string> out;
  if (!(std::isfinite(f.min_gap) && std::isfinite(f.max_gap) && 0 <= f.min_gap && f.min_gap < f.max_gap)) {
    out.push_back("gap filter needs 0 <= min_gap < max_gap");
  }
  return out;
}

std::string_view ToString(ExclusionReason r) {
  switch (r) {
    case ExclusionReason::kAllResponsesFailed: return "AllResponsesFailed";
    case ExclusionReason::kNoResponses: return "NoResponses";
    case ExclusionReason::kNoEligibleResponse: return "NoEligibleResponse";
  }
  return "?";
}

std::optional<ExclusionReason> ParseExclusionReason(std::string_view s) {
  for (auto r : {ExclusionReason::kAllResponsesFailed, ExclusionReason::kNoResponses,
                 ExclusionReason::kNoEligibleResponse}) {
    if (ToString(r) == s) return r;
  }
  return std::nullopt;
}

void to_json(nlohmann::json& j, const ExclusionRecord& r) {
  j = nlohmann::json{{"prompt_id", r.prompt_id}, {"domain", ToString(r.domain)}, {"reason", ToString(r.reason)}};
}

void from_json(const nlohmann::json& j, ExclusionRecord& r) {
  j.at("prompt_id").get_to(r.prompt_id);
  auto d = ParseDomain(j.at("domain").get<std::string>());
  auto reason = ParseExclusionReason(j.at("reason").get<std::string>());
  if (!d || !reason) throw nlohmann::json::other_error::create(501, "bad exclusion record", &j);
  r.domain = *d;
  r.reason = *reason;
}

namespace {

using Group = std::vector<const ScoredResponse*>;

// Strict "a ranks above b": higher score, then smaller (model, seed).
bool Better(const ScoredResponse& a, const ScoredResponse& b) {
  if (*a.rm_score != *b.rm_score) return *a.rm_score > *b.rm_score;
  return std::tie(a.source_model, a.seed) < std::tie(b.source_model, b.seed);
}

// Strict "a ranks below b" for negatives: lower score, then smaller (model, seed).
bool Worse(const ScoredResponse& a, const ScoredResponse& b) {
  if (*a.rm_score != *b.rm_score) return *a.rm_score < *b.rm_score;
  return std::tie(a.source_model, a.seed) < std::tie(b.source_model, b.seed);
}

const ScoredResponse* Best(const Group& g, const ScoredResponse* skip = nullptr) {
  const ScoredResponse* best = nullptr;
  for (const auto* r : g) {
    if (r != skip && (best == nullptr || Better(*r, *best))) best = r;
  }
  return best;
}

const ScoredResponse* Worst(const Group& g, const ScoredResponse* skip = nullptr) {
  const ScoredResponse* worst = nullptr;
  for (const auto* r : g) {
    if (r != skip && (worst == nullptr || Worse(*r, *worst))) worst = r;
  }
  return worst;
}

std::map<std::string, Group> ByModel(const Prompt& prompt, std::span<const ScoredResponse> responses) {
  std::map<std::string, Group> groups;
  for (const auto& r : responses) {
    if (r.prompt_id == prompt.id && r.rm_score) groups[r.source_model].push_back(&r);
  }
  return groups;
}

PreferencePair MakePair(const ScoredResponse& chosen, const ScoredResponse& rejected) {
  return PreferencePair{chosen.prompt_id, chosen.source_model, chosen, rejected,
                        *chosen.rm_score - *rejected.rm_score};
}

// Keeps the candidate with the highest chosen score (first model on ties),
// or all of them.
std::vector<PreferencePair> SelectGlobal(std::vector<PreferencePair> candidates, const PairOptions& options) {
  if (options.keep_all_model_pairs || candidates.size() <= 1) return candidates;
  std::size_t best = 0;
  for (std::size_t i = 1; i < candidates.size(); ++i) {
    if (*candidates[i].chosen.rm_score > *candidates[best].chosen.rm_score) best = i;
  }
  return {std::move(candidates[best])};
}

// Per model: best response satisfying `positive` against worst satisfying
// `negative`.
template <typename Pos, typename Neg>
std::vector<PreferencePair> VerifiedPairs(const Prompt& prompt, std::span<const ScoredResponse> responses,
                                         const PairOptions& options, Pos positive, Neg negative) {
  std::vector<PreferencePair> candidates;
  for (const auto& [model, group] : ByModel(prompt, responses)) {
    Group pos, neg;
    for (const auto* r : group) {
      if (positive(*r)) pos.push_back(r);
      else if (negative(*r)) neg.push_back(r);
    }
    const auto* chosen = Best(pos);
    const auto* rejected = Worst(neg);
    if (chosen == nullptr || rejected == nullptr) continue;
    if (*chosen->rm_score < *rejected->rm_score) continue;
    auto pair = MakePair(*chosen, *rejected);
    if (options.gap_filter_all_domains && !options.gap_filter.Accepts(pair.gap)) continue;
    candidates.push_back(std::move(pair));
  }
  return SelectGlobal(std::move(candidates), options);
}

bool IsCorrect(const ScoredResponse& r) { return r.correctness == Correctness::kCorrect; }
bool IsIncorrect(const ScoredResponse& r) { return r.correctness == Correctness::kIncorrect; }

}  // namespace

std::optional<SftExample> SelectSftResponse(const Prompt& prompt, std::span<const ScoredResponse> responses) {
  const bool needs_correct = prompt.domain == Domain::kMathematics || prompt.domain == Domain::kCoding;
  const ScoredResponse* best = nullptr;
  for (const auto& r : responses) {
    if (r.prompt_id != prompt.id || !r.rm_score) continue;
    if (needs_correct && !IsCorrect(r)) continue;
    if (best == nullptr || Better(r, *best)) best = &r;
  }
  if (best == nullptr) return std::nullopt;
  return SftExample{prompt.id, *best, ExpectedSelectionReason(prompt.domain)};
}

std::vector<PreferencePair> BuildIfPair(const Prompt& prompt, std::span<const ScoredResponse> responses,
                                        const PairOptions& options) {
  std::vector<PreferencePair> candidates;
  for (const auto& [model, group] : ByModel(prompt, responses)) {
    if (group.size() < 2) continue;
    const auto* chosen = Best(group);
    const auto* rejected = Worst(group, chosen);
    auto pair = MakePair(*chosen, *rejected);
    if (!options.gap_filter.Accepts(pair.gap)) continue;
    candidates.push_back(std::move(pair));
  }
  return SelectGlobal(std::move(candidates), options);
}

std::vector<PreferencePair> BuildMathPair(const Prompt& prompt, std::span<const ScoredResponse> responses,
                                          const PairOptions& options) {
  return VerifiedPairs(prompt, responses, options, IsCorrect, IsIncorrect);
}

std::vector<PreferencePair> BuildCodePair(const Prompt& prompt, std::span<const ScoredResponse> responses,
                                          const PairOptions& options) {
  // Anything that did not pass all tests counts as failing.
  return VerifiedPairs(prompt, responses, options, IsCorrect,
                       [](const ScoredResponse& r) { return !IsCorrect(r); });
}

DatasetBuild BuildDataset(std::span<const Prompt> corpus, std::span<const ScoredResponse> pool,
                          const PairOptions& options) {
  std::unordered_map<std::string, std::vector<ScoredResponse>> by_prompt;
  for (const auto& r : pool) {
    if (r.rm_score) by_prompt[r.prompt_id].push_back(r);
  }

  DatasetBuild out;
  static const std::vector<ScoredResponse> kNone;
  for (const Prompt& p : corpus) {
    auto it = by_prompt.find(p.id);
    const auto& responses = it == by_prompt.end() ? kNone : it->second;
    if (responses.empty()) {
      out.exclusions.push_back({p.id, p.domain, ExclusionReason::kNoResponses});
      continue;
    }
    if (p.domain == Domain::kCoding &&
        std::none_of(responses.begin(), responses.end(), IsCorrect)) {
      out.exclusions.push_back({p.id, p.domain, ExclusionReason::kAllResponsesFailed});
      continue;
    }
    auto sft = SelectSftResponse(p, responses);
    if (!sft) {
      out.exclusions.push_back({p.id, p.domain, ExclusionReason::kNoEligibleResponse});
      continue;
    }
    out.sft.push_back(std::move(*sft));

    std::vector<PreferencePair> pairs;
    switch (p.domain) {
      case Domain::kInstructionFollowing: pairs = BuildIfPair(p, responses, options); break;
      case Domain::kMathematics: pairs = BuildMathPair(p, responses, options); break;
      case Domain::kCoding: pairs = BuildCodePair(p, responses, options); break;
      case Domain::kChinese: break;
    }
    std::move(pairs.begin(), pairs.end(), std::back_inserter(out.pairs));
  }
  return out;
}

}  // namespace fusepipe
