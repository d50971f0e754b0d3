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

#include <random>
#include <string>

#include <gtest/gtest.h>

#include "fusepipe/jsonl.h"
#include "fusepipe/types.h"
#include "test_support.h"

namespace fusepipe {
namespace {

using testing::MakePrompt;
using testing::Response;
using testing::TempDir;

bool Contains(const std::vector<std::string>& v, const std::string& needle) {
  for (const auto& s : v) {
    if (s.find(needle) != std::string::npos) return true;
  }
  return false;
}

TEST(EnumTest, NamesRoundTrip) {
  for (Domain d : kAllDomains) EXPECT_EQ(ParseDomain(ToString(d)), d);
  for (auto c : {Correctness::kUnknown, Correctness::kCorrect, Correctness::kIncorrect}) {
    EXPECT_EQ(ParseCorrectness(ToString(c)), c);
  }
  for (auto r : {SelectionReason::kHighestRm, SelectionReason::kCorrectHighestRm,
                 SelectionReason::kPassAllHighestRm, SelectionReason::kSingleSourceChinese}) {
    EXPECT_EQ(ParseSelectionReason(ToString(r)), r);
  }
  EXPECT_EQ(ToString(Domain::kInstructionFollowing), "InstructionFollowing");
  EXPECT_FALSE(ParseDomain("instructionfollowing"));
}

TEST(PromptValidationTest, DomainSpecificFields) {
  EXPECT_TRUE(Validate(MakePrompt("a", Domain::kMathematics)).empty());
  EXPECT_TRUE(Validate(MakePrompt("a", Domain::kCoding)).empty());
  EXPECT_TRUE(Validate(MakePrompt("a", Domain::kChinese)).empty());

  auto math = MakePrompt("a", Domain::kMathematics);
  math.gold_answer.reset();
  EXPECT_TRUE(Contains(Validate(math), "without gold_answer"));

  auto code = MakePrompt("a", Domain::kCoding);
  code.test_cases = std::vector<TestCase>{};
  EXPECT_TRUE(Contains(Validate(code), "empty test_cases"));

  auto chat = MakePrompt("a", Domain::kInstructionFollowing);
  chat.gold_answer = "1";
  EXPECT_FALSE(Validate(chat).empty());

  auto bad_timeout = MakePrompt("a", Domain::kCoding);
  (*bad_timeout.test_cases)[0].timeout_ms = 0;
  EXPECT_TRUE(Contains(Validate(bad_timeout), "timeout_ms"));
}

TEST(ResponseValidationTest, ScoreRangeAndCorrectnessByDomain) {
  auto r = Response("p", "m", 0, 0.5);
  EXPECT_TRUE(Validate(r, Domain::kInstructionFollowing).empty());
  r.rm_score = 1.5;
  EXPECT_TRUE(Contains(Validate(r), "rm_score"));
  r.rm_score = std::numeric_limits<double>::quiet_NaN();
  EXPECT_TRUE(Contains(Validate(r), "rm_score"));

  auto math = Response("p", "m", 0, 0.5);
  EXPECT_FALSE(Validate(math, Domain::kMathematics).empty());
  math.correctness = Correctness::kCorrect;
  EXPECT_TRUE(Validate(math, Domain::kMathematics).empty());
  EXPECT_FALSE(Validate(math, Domain::kChinese).empty());
}

TEST(PairValidationTest, IntraModelAndOrdering) {
  PreferencePair p{"p", "m", Response("p", "m", 0, 0.8), Response("p", "m", 1, 0.7), 0.8 - 0.7};
  EXPECT_TRUE(Validate(p, Domain::kInstructionFollowing).empty());

  auto cross = p;
  cross.rejected.source_model = "other";
  EXPECT_TRUE(Contains(Validate(cross), "not intra-model"));

  auto flipped = p;
  std::swap(flipped.chosen, flipped.rejected);
  flipped.gap = -flipped.gap;
  EXPECT_TRUE(Contains(Validate(flipped), "chosen scores below rejected"));

  auto gap = p;
  gap.gap += 1e-9;
  EXPECT_TRUE(Contains(Validate(gap), "gap"));

  EXPECT_TRUE(Contains(Validate(p, Domain::kChinese), "never produce pairs"));

  auto math = p;
  math.chosen.correctness = Correctness::kCorrect;
  math.rejected.correctness = Correctness::kCorrect;
  EXPECT_TRUE(Contains(Validate(math, Domain::kMathematics), "rejected is not Incorrect"));
}

TEST(SftExampleValidationTest, ReasonMatchesDomain) {
  SftExample e{"p", Response("p", "m", 0, 0.5), SelectionReason::kHighestRm};
  EXPECT_TRUE(Validate(e, Domain::kInstructionFollowing).empty());
  EXPECT_FALSE(Validate(e, Domain::kChinese).empty());
  e.selection_reason = SelectionReason::kSingleSourceChinese;
  EXPECT_TRUE(Validate(e, Domain::kChinese).empty());
}

TEST(TokenCountTest, Whitespace) {
  EXPECT_EQ(WhitespaceTokenCount(""), 0);
  EXPECT_EQ(WhitespaceTokenCount("  a  b\tc\n"), 3);
}

// Round trip over randomized records.
TEST(JsonlTest, RoundTripIsIdentity) {
  std::mt19937_64 rng(3);
  auto rc = testing::MakeRandomCase(rng, 40);
  for (auto& r : rc.pool) r.text = "line1\nline2 \"quoted\" \xe4\xb8\xad\xe6\x96\x87";
  rc.pool[0].rm_score.reset();
  const auto text = ToJsonl(std::span<const ScoredResponse>(rc.pool));
  auto back = ParseJsonl<ScoredResponse>(text);
  ASSERT_TRUE(back.issues.empty());
  EXPECT_EQ(back.records, rc.pool);

  auto prompts = ParseJsonl<Prompt>(ToJsonl(std::span<const Prompt>(rc.corpus)));
  EXPECT_EQ(prompts.records, rc.corpus);

  const auto build = testing::OracleBuildDataset(rc.corpus, rc.pool);
  auto pairs = ParseJsonl<PreferencePair>(ToJsonl(std::span<const PreferencePair>(build.pairs)));
  EXPECT_EQ(pairs.records, build.pairs);
  auto sft = ParseJsonl<SftExample>(ToJsonl(std::span<const SftExample>(build.sft)));
  EXPECT_EQ(sft.records, build.sft);
}

TEST(JsonlTest, UnscoredResponseWritesNull) {
  auto r = Response("p", "m", 0, 0.5);
  r.rm_score.reset();
  EXPECT_TRUE(nlohmann::json(r).at("rm_score").is_null());
}

TEST(JsonlTest, SchemaHeaderFirstAndChecked) {
  const std::vector<Prompt> none;
  EXPECT_EQ(ToJsonl(std::span<const Prompt>(none)), "#schema: fusepipe/1\n");
  EXPECT_THROW(ParseJsonl<Prompt>("#schema: fusepipe/2\n"), FormatError);
}

TEST(JsonlTest, MalformedLinesAreRecorded) {
  const auto r = ParseJsonl<Prompt>(
      "#schema: fusepipe/1\n"
      "{\"id\":\"a\",\"domain\":\"Chinese\",\"text\":\"t\",\"source_dataset\":\"s\"}\n"
      "{not json\n"
      "\n"
      "{\"id\":\"b\",\"domain\":\"Nope\",\"text\":\"t\",\"source_dataset\":\"s\"}\n");
  ASSERT_EQ(r.records.size(), 1u);
  EXPECT_EQ(r.record_lines[0], 2u);
  ASSERT_EQ(r.issues.size(), 2u);
  EXPECT_EQ(r.issues[0].line, 3u);
  EXPECT_EQ(r.issues[1].line, 5u);
}

TEST(ValidateCorpusTest, EmptyFile) {
  TempDir dir;
  WriteFileAtomic(dir / "c.jsonl", "");
  const auto report = ValidateCorpus(dir / "c.jsonl");
  EXPECT_EQ(report.counts.size(), 4u);
  for (const auto& [d, n] : report.counts) EXPECT_EQ(n, 0u) << ToString(d);
  EXPECT_TRUE(report.violations.empty());
}

TEST(ValidateCorpusTest, SingleMathPrompt) {
  const auto report = ValidateCorpusText(
      R"({"id":"m","domain":"Mathematics","text":"Compute 9 * 8.","gold_answer":"72","source_dataset":"s"})");
  EXPECT_EQ(report.counts.at(Domain::kMathematics), 1u);
  EXPECT_TRUE(report.violations.empty());
}

TEST(ValidateCorpusTest, EmptyTestCases) {
  const auto report = ValidateCorpusText(
      R"({"id":"c","domain":"Coding","text":"x","test_cases":[],"source_dataset":"s"})");
  ASSERT_EQ(report.violations.size(), 1u);
  EXPECT_EQ(report.violations[0].message, "empty test_cases");
  EXPECT_EQ(report.violations[0].line, 1u);
}

TEST(ValidateCorpusTest, DuplicatesAndMalformedLines) {
  const auto report = ValidateCorpusText(
      "{\"id\":\"a\",\"domain\":\"Chinese\",\"text\":\"t\",\"source_dataset\":\"s\"}\n"
      "garbage\n"
      "{\"id\":\"a\",\"domain\":\"Chinese\",\"text\":\"t\",\"source_dataset\":\"s\"}\n");
  EXPECT_EQ(report.malformed_lines, 1u);
  EXPECT_EQ(report.counts.at(Domain::kChinese), 2u);
  ASSERT_EQ(report.violations.size(), 2u);
  EXPECT_EQ(report.violations[0].line, 2u);
  EXPECT_EQ(report.violations[1].message, "duplicate id");
}

TEST(ValidateCorpusTest, BundledFixtureIsValid) {
  const auto report = ValidateCorpus(std::string(FUSEPIPE_FIXTURE_DIR) + "/prompts.jsonl");
  EXPECT_TRUE(report.violations.empty());
  EXPECT_EQ(report.counts.at(Domain::kInstructionFollowing), 8u);
  EXPECT_EQ(report.counts.at(Domain::kMathematics), 5u);
  EXPECT_EQ(report.counts.at(Domain::kCoding), 4u);
  EXPECT_EQ(report.counts.at(Domain::kChinese), 3u);
}

TEST(ValidateCorpusTest, UnreadableFileThrows) {
  EXPECT_THROW(ValidateCorpus("/nonexistent/corpus.jsonl"), IoError);
}

TEST(AtomicWriteTest, ReplacesWithoutLeftovers) {
  TempDir dir;
  WriteFileAtomic(dir / "f.txt", "one");
  WriteFileAtomic(dir / "f.txt", "two");
  EXPECT_EQ(ReadFile(dir / "f.txt"), "two");
  std::size_t files = 0;
  for ([[maybe_unused]] const auto& e : std::filesystem::directory_iterator(dir.path())) ++files;
  EXPECT_EQ(files, 1u);
}

}  // namespace
}  // namespace fusepipe
