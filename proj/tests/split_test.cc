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

#include <algorithm>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "fusepipe/errors.h"
#include "fusepipe/pairs.h"
#include "fusepipe/split.h"
#include "test_support.h"

namespace fusepipe {
namespace {

using testing::MakePrompt;
using testing::MakeRandomCase;
using testing::Response;

struct Inputs {
  std::vector<Prompt> corpus;
  std::vector<SftExample> sft;
  std::vector<PreferencePair> pairs;
};

// n prompts of one domain, each with an SFT example; the first `with_pairs`
// (by index) also get a pair.
Inputs Uniform(Domain d, int n, int with_pairs, const std::string& source = "src") {
  Inputs in;
  for (int i = 0; i < n; ++i) {
    const std::string id = "p" + std::to_string(i);
    in.corpus.push_back(MakePrompt(id, d, source));
    const auto best = Response(id, "m", 0, 0.9);
    in.sft.push_back({id, best, ExpectedSelectionReason(d)});
    if (i < with_pairs) in.pairs.push_back({id, "m", best, Response(id, "m", 1, 0.85), 0.05});
  }
  return in;
}

std::set<std::string> Ids(const SplitResult& r, bool sft) {
  std::set<std::string> out;
  if (sft) {
    for (const auto& s : r.sft) out.insert(s.prompt_id);
  } else {
    for (const auto& d : r.dpo) out.insert(d.prompt_id);
  }
  return out;
}

TEST(SftQuotaTest, CeilingWithExactProducts) {
  EXPECT_EQ(SftQuota(0.4, 10), 4u);
  EXPECT_EQ(SftQuota(0.4, 11), 5u);
  EXPECT_EQ(SftQuota(0.4, 0), 0u);
  EXPECT_EQ(SftQuota(0.3, 10), 3u);
}

TEST(SeededPermutationTest, IsAPermutationAndDeterministic) {
  for (std::size_t n : {0u, 1u, 7u, 100u}) {
    auto p = SeededPermutation(n, 42);
    EXPECT_EQ(p, SeededPermutation(n, 42));
    std::sort(p.begin(), p.end());
    for (std::size_t i = 0; i < n; ++i) EXPECT_EQ(p[i], i);
  }
  EXPECT_NE(SeededPermutation(20, 1), SeededPermutation(20, 2));
}

TEST(PartitionTest, InstructionFollowingFourToSix) {
  const auto in = Uniform(Domain::kInstructionFollowing, 10, 10);
  const auto out = Partition(in.corpus, in.sft, in.pairs);
  EXPECT_EQ(out.sft.size(), 4u);
  EXPECT_EQ(out.dpo.size(), 6u);
}

TEST(PartitionTest, ChineseIsAllSft) {
  auto in = Uniform(Domain::kChinese, 10, 0);
  const auto out = Partition(in.corpus, in.sft, in.pairs);
  EXPECT_EQ(out.sft.size(), 10u);
  EXPECT_TRUE(out.dpo.empty());
}

// Reference: apply the permutation by hand.
TEST(PartitionTest, SparsePairsFallBackToSft) {
  const auto in = Uniform(Domain::kInstructionFollowing, 10, 3);
  for (uint64_t seed = 0; seed < 20; ++seed) {
    SplitConfig config;
    config.seed = seed;
    const auto out = Partition(in.corpus, in.sft, in.pairs, config);
    const auto perm = SeededPermutation(10, seed);
    std::set<std::string> expected_dpo;
    for (std::size_t k = 4; k < 10; ++k) {
      if (perm[k] < 3) expected_dpo.insert("p" + std::to_string(perm[k]));
    }
    const auto dpo = Ids(out, false);
    const auto sft = Ids(out, true);
    EXPECT_EQ(dpo, expected_dpo);
    for (const auto& id : dpo) EXPECT_LT(std::stoi(id.substr(1)), 3);
    EXPECT_EQ(sft.size() + dpo.size(), 10u);
    for (const auto& id : dpo) EXPECT_FALSE(sft.count(id));
  }
}

TEST(PartitionTest, MathGoesToDpoIffPaired) {
  const auto in = Uniform(Domain::kMathematics, 10, 3);
  const auto out = Partition(in.corpus, in.sft, in.pairs);
  EXPECT_EQ(Ids(out, false), (std::set<std::string>{"p0", "p1", "p2"}));
  EXPECT_EQ(out.sft.size(), 7u);
}

TEST(PartitionTest, MathRatioRuleWhenConfigured) {
  const auto in = Uniform(Domain::kMathematics, 10, 10);
  SplitConfig config;
  config.math_dpo_requires_pair = false;
  const auto out = Partition(in.corpus, in.sft, in.pairs, config);
  EXPECT_EQ(out.sft.size(), 4u);
  EXPECT_EQ(out.dpo.size(), 6u);
}

TEST(PartitionTest, PromptsWithoutSelectionsAreDropped) {
  auto in = Uniform(Domain::kCoding, 4, 0);
  in.sft.pop_back();
  const auto out = Partition(in.corpus, in.sft, in.pairs);
  EXPECT_EQ(out.sft.size(), 3u);
  EXPECT_TRUE(out.dpo.empty());
}

TEST(PartitionTest, InvalidFraction) {
  SplitConfig config;
  config.if_sft_fraction = 1.0;
  EXPECT_THROW(Partition({}, {}, {}, config), ConfigError);
  config.if_sft_fraction = 0.0;
  EXPECT_FALSE(Validate(config).empty());
}

TEST(PartitionTest, DisjointCoverageAndDeterminism) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 30; ++trial) {
    const auto c = MakeRandomCase(rng, 80);
    const auto build = BuildDataset(c.corpus, c.pool);
    SplitConfig config;
    config.seed = static_cast<uint64_t>(trial);
    const auto out = Partition(c.corpus, build.sft, build.pairs, config);
    const auto again = Partition(c.corpus, build.sft, build.pairs, config);
    EXPECT_EQ(out.sft, again.sft);
    EXPECT_EQ(out.dpo, again.dpo);

    std::set<std::string> eligible;
    for (const auto& s : build.sft) eligible.insert(s.prompt_id);
    for (const auto& p : build.pairs) eligible.insert(p.prompt_id);
    const auto sft = Ids(out, true), dpo = Ids(out, false);
    std::set<std::string> both;
    std::set_intersection(sft.begin(), sft.end(), dpo.begin(), dpo.end(), std::inserter(both, both.end()));
    EXPECT_TRUE(both.empty());
    std::set<std::string> all = sft;
    all.insert(dpo.begin(), dpo.end());
    EXPECT_EQ(all, eligible);
    for (const auto& d : out.dpo) EXPECT_NE(d.domain, Domain::kChinese);
    EXPECT_TRUE(CheckConservation(ComposeReport(out.sft, out.dpo)).empty());
  }
}

TEST(ReportTest, EmptyIsAllZero) {
  const auto r = ComposeReport({}, {});
  EXPECT_TRUE(r.rows.empty());
  EXPECT_EQ(r.total_count, 0);
  EXPECT_EQ(r.total_sft, 0);
  EXPECT_EQ(r.total_dpo, 0);
  EXPECT_TRUE(CheckConservation(r).empty());
}

TEST(ReportTest, HandCountedThreeRows) {
  Inputs in;
  auto add = [&](const std::string& id, Domain d, const std::string& src, bool pair) {
    in.corpus.push_back(MakePrompt(id, d, src));
    const auto best = Response(id, "m", 0, 0.9, d == Domain::kMathematics ? Correctness::kCorrect
                                                                            : Correctness::kUnknown);
    in.sft.push_back({id, best, ExpectedSelectionReason(d)});
    if (pair) in.pairs.push_back({id, "m", best, Response(id, "m", 1, 0.1, Correctness::kIncorrect), 0.8});
  };
  add("m1", Domain::kMathematics, "omi", true);
  add("m2", Domain::kMathematics, "omi", false);
  add("m3", Domain::kMathematics, "omi", true);
  add("z1", Domain::kChinese, "zh", false);
  add("z2", Domain::kChinese, "zh", false);
  add("c1", Domain::kCoding, "lc", true);
  const auto split = Partition(in.corpus, in.sft, in.pairs);
  const auto r = ComposeReport(split.sft, split.dpo);
  const std::vector<ReportRow> expected = {{Domain::kMathematics, "omi", 3, 1, 2},
                                           {Domain::kCoding, "lc", 1, 0, 1},
                                           {Domain::kChinese, "zh", 2, 2, 0}};
  EXPECT_EQ(r.rows, expected);
  EXPECT_EQ(r.total_count, 6);
  EXPECT_EQ(r.total_sft, 3);
  EXPECT_EQ(r.total_dpo, 3);
  const auto json = ReportToJson(r);
  EXPECT_EQ(json["total"]["count"], 6);
  const auto text = RenderReportText(r);
  EXPECT_NE(text.find("omi"), std::string::npos);
  EXPECT_NE(text.find("Total"), std::string::npos);
}

// The published dataset composition table, checked for conservation.
TEST(ReportTest, PublishedCompositionConserves) {
  const auto r = ReportFromRows({
      {Domain::kInstructionFollowing, "UltraFeedback", 51098, 20439, 30659},
      {Domain::kInstructionFollowing, "Magpie-Pro-DPO", 20374, 8149, 12225},
      {Domain::kInstructionFollowing, "HelpSteer2", 9435, 3774, 5661},
      {Domain::kMathematics, "OpenMathInstruct-2", 51803, 40188, 11615},
      {Domain::kCoding, "LeetCode", 3113, 1877, 1236},
      {Domain::kCoding, "Self-Oss-Instruct-SC2", 12892, 10160, 2732},
      {Domain::kChinese, "Alpaca-GPT4-Zh", 2471, 2471, 0},
      {Domain::kChinese, "Magpie-Qwen2-Pro-Zh", 7481, 7481, 0},
  });
  EXPECT_EQ(r.total_count, 158667);
  EXPECT_EQ(r.total_sft, 94539);
  EXPECT_EQ(r.total_dpo, 64128);
  EXPECT_TRUE(CheckConservation(r).empty());
}

TEST(ReportTest, ConservationViolationIsReported) {
  auto r = ReportFromRows({{Domain::kCoding, "x", 5, 2, 2}});
  const auto bad = CheckConservation(r);
  ASSERT_FALSE(bad.empty());
  EXPECT_NE(bad.front().find("x"), std::string::npos);
}

}  // namespace
}  // namespace fusepipe
